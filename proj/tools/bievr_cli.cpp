// Copyright 2026 BIEVR-LIO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "bievr/bievr.hpp"

namespace fs = std::filesystem;

namespace {

bievr::PipelineConfig make_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
  bievr::PipelineConfig config;
  if (!config_path.empty()) config = bievr::load_config(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    }
    bievr::apply_config_entry(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  bievr::validate_config(config);
  return config;
}

int cmd_simulate(const std::string& scene, std::uint64_t seed,
                 const std::string& out_dir) {
  const bievr::SceneSetup setup = bievr::named_scene_setup(scene);
  const bievr::SimResult sim = bievr::simulate(setup.scene, setup.trajectory, seed);

  fs::create_directories(out_dir);
  std::vector<std::string> scan_files;
  for (std::size_t i = 0; i < sim.scans.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "scan_%05zu.bin", i);
    bievr::write_scan((fs::path(out_dir) / name).string(), sim.scans[i]);
    scan_files.emplace_back(name);
  }
  bievr::write_manifest((fs::path(out_dir) / "scans.manifest").string(),
                        scan_files);
  bievr::write_imu((fs::path(out_dir) / "imu.txt").string(), sim.imu);
  bievr::write_tum((fs::path(out_dir) / "gt.tum").string(), sim.gt_poses);
  std::cout << "wrote " << sim.scans.size() << " scans, " << sim.imu.size()
            << " imu samples to " << out_dir << "\n";
  return 0;
}

int cmd_run(const std::string& config_path,
            const std::vector<std::string>& overrides,
            const std::string& manifest, const std::string& imu_path,
            const std::string& out_traj, const std::string& frame_log,
            const std::string& map_out) {
  const bievr::PipelineConfig config = make_config(config_path, overrides);
  const std::vector<std::string> scan_files = bievr::read_manifest(manifest);
  const std::vector<bievr::ImuSample> imu = bievr::read_imu(imu_path);
  if (scan_files.empty()) throw std::runtime_error("manifest lists no scans");
  if (imu.empty()) throw std::runtime_error("empty IMU stream");

  bievr::Pipeline pipeline(config);
  std::ofstream log;
  if (!frame_log.empty()) {
    log.open(frame_log);
    if (!log) throw std::runtime_error("cannot open frame log: " + frame_log);
  }

  bievr::Trajectory trajectory;
  std::size_t next_imu = 0;
  for (const std::string& file : scan_files) {
    const bievr::Scan scan = bievr::read_scan(file);
    while (next_imu < imu.size() &&
           imu[next_imu].timestamp <= scan.stamp_end + 0.01) {
      pipeline.add_imu(imu[next_imu++]);
    }
    if (!pipeline.initialized()) {
      if (!pipeline.startup_ready()) continue;
      pipeline.initialize();
    }
    if (scan.stamp_end <= pipeline.pose_stamp() + 1e-9) continue;
    const bievr::FrameResult frame = pipeline.process_frame(scan);
    trajectory.push_back({frame.timestamp, frame.pose});
    if (log.is_open()) bievr::write_frame_log_line(log, frame);
  }

  bievr::write_tum(out_traj, trajectory);
  std::cout << "processed " << trajectory.size() << " frames, map holds "
            << pipeline.map().size() << " voxels\n";
  if (!map_out.empty()) {
    pipeline.map().save_snapshot(map_out);
    std::cout << "map snapshot written to " << map_out << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             double segment_len) {
  const bievr::Trajectory est = bievr::read_tum(est_path);
  const bievr::Trajectory gt = bievr::read_tum(gt_path);
  std::cout << std::setprecision(6) << "ATE RMSE [m]: "
            << bievr::ate_rmse(est, gt) << "\n";
  try {
    std::cout << "RE RMSE [%] over " << segment_len
              << " m segments: " << bievr::relative_error_percent(est, gt, segment_len)
              << "\n";
  } catch (const std::invalid_argument& e) {
    std::cout << "RE: " << e.what() << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& scene, std::vector<std::string> modes,
              std::uint64_t seed, const std::string& config_path,
              const std::vector<std::string>& overrides) {
  if (modes.empty()) {
    for (const bievr::AblationMode& m : bievr::ablation_modes()) {
      modes.push_back(m.name);
    }
  }
  const bievr::PipelineConfig config = make_config(config_path, overrides);
  const bievr::BenchmarkReport report =
      bievr::run_benchmark(scene, modes, seed, config);
  bievr::print_benchmark(std::cout, report);
  return 0;
}

int cmd_export_elevation(const std::string& map_path, double cx, double cy,
                         double extent, double res, const std::string& out) {
  const bievr::VoxelMap::Snapshot snap = bievr::VoxelMap::load_snapshot(map_path);
  const bievr::ElevationGrid grid = bievr::export_elevation(
      snap, bievr::Vec3(cx, cy, 0.0), extent, extent, res);
  bievr::write_elevation(out, grid);
  std::size_t known = 0;
  for (double v : grid.values) {
    if (!std::isnan(v)) ++known;
  }
  std::cout << "elevation grid " << grid.cols << "x" << grid.rows << ", "
            << known << " known cells, written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BIEVR-LIO: LiDAR-inertial odometry on bump-image voxel maps"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_scene = "tunnel";
  std::uint64_t sim_seed = 0;
  std::string sim_out = "sim_out";
  sim->add_option("--scene", sim_scene, "tunnel | room | box_on_plane");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out-dir", sim_out, "output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "run odometry over recorded data");
  std::string run_config, run_manifest, run_imu, run_traj = "trajectory.tum";
  std::string run_log, run_map;
  std::vector<std::string> run_set;
  run->add_option("--config", run_config, "key-value config file");
  run->add_option("--set", run_set, "override config entries (key=value)");
  run->add_option("--scans", run_manifest, "scan manifest")->required();
  run->add_option("--imu", run_imu, "IMU text file")->required();
  run->add_option("--out", run_traj, "output trajectory (TUM)");
  run->add_option("--log", run_log, "per-frame JSONL log");
  run->add_option("--map-out", run_map, "map snapshot output");

  // eval
  auto* eval = app.add_subcommand("eval", "trajectory metrics");
  std::string eval_est, eval_gt;
  double eval_segment = 10.0;
  eval->add_option("--est", eval_est, "estimated trajectory (TUM)")->required();
  eval->add_option("--gt", eval_gt, "ground-truth trajectory (TUM)")->required();
  eval->add_option("--segment", eval_segment, "RE segment length [m]");

  // bench
  auto* bench = app.add_subcommand("bench", "ablation benchmark on a scene");
  std::string bench_scene = "tunnel", bench_config;
  std::vector<std::string> bench_modes, bench_set;
  std::uint64_t bench_seed = 0;
  bench->add_option("--scene", bench_scene, "tunnel | room | box_on_plane");
  bench->add_option("--modes", bench_modes,
                    "subset of: plane-x-hr bievr-x-hr bievr-g-hr bievr-g-rd "
                    "bievr-g-id");
  bench->add_option("--seed", bench_seed, "random seed");
  bench->add_option("--config", bench_config, "key-value config file");
  bench->add_option("--set", bench_set, "override config entries (key=value)");

  // export-elevation
  auto* exp = app.add_subcommand("export-elevation",
                                 "elevation grid from a map snapshot");
  std::string exp_map, exp_out = "elevation.txt";
  double exp_cx = 0.0, exp_cy = 0.0, exp_extent = 4.0, exp_res = 0.05;
  exp->add_option("--map", exp_map, "map snapshot file")->required();
  exp->add_option("--center-x", exp_cx, "grid center x [m]");
  exp->add_option("--center-y", exp_cy, "grid center y [m]");
  exp->add_option("--extent", exp_extent, "grid side length [m]");
  exp->add_option("--res", exp_res, "cell resolution [m]");
  exp->add_option("--out", exp_out, "output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_scene, sim_seed, sim_out);
    if (run->parsed())
      return cmd_run(run_config, run_set, run_manifest, run_imu, run_traj,
                     run_log, run_map);
    if (eval->parsed()) return cmd_eval(eval_est, eval_gt, eval_segment);
    if (bench->parsed())
      return cmd_bench(bench_scene, bench_modes, bench_seed, bench_config,
                       bench_set);
    if (exp->parsed())
      return cmd_export_elevation(exp_map, exp_cx, exp_cy, exp_extent, exp_res,
                                  exp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
