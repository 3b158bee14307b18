// Command-line driver: runs pipeline stages from a JSON run config and
// writes the artifacts into the output directory. `report --compare` merges
// finished report CSVs into a cross-variant comparison instead.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "micromix/micromix.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_stage(const std::string& stage, const std::string& config_path,
              const std::string& out_dir, int threads, bool force,
              bool stokes) {
  micromix::RunConfig rc = micromix::parse_config(read_file(config_path));
  rc.stages = {stage};
  if (!out_dir.empty()) rc.output.directory = out_dir;
  if (threads >= 0) rc.threads = threads;
  if (stokes) rc.flow.stokes_mode = true;

  const auto result = micromix::run_pipeline(rc, force);
  std::cout << "wrote " << result.manifest.size() << " artifacts to "
            << rc.output.directory << "\n";
  for (const auto& a : result.manifest)
    std::cout << "  " << a.path << "  " << a.bytes << " bytes  fnv1a64:"
              << a.checksum << "\n";
  return 0;
}

int run_compare(const std::vector<std::string>& report_csvs,
                const std::string& out_path, double threshold) {
  namespace fs = std::filesystem;
  std::vector<micromix::MixingReport> reports;
  for (const auto& path : report_csvs) {
    micromix::MixingReport r =
        micromix::report_from_csv(micromix::read_csv(path));
    // recover run conditions from the meta sidecar next to the CSV
    const fs::path meta_path = fs::path(path).parent_path() / "meta.json";
    if (fs::exists(meta_path)) {
      const auto meta = nlohmann::json::parse(read_file(meta_path.string()));
      r.conditions.q_total_ul_min =
          2.0 * meta.at("config_resolved").at("flow")
                    .at("flow_rate_per_inlet_ul_per_min").get<double>();
      r.conditions.reynolds = meta.at("derived").at("reynolds").get<double>();
      r.conditions.h_um = meta.at("config_resolved").at("numerics")
                              .at("grid_spacing_um").get<double>();
    }
    reports.push_back(std::move(r));
  }
  const auto cr = micromix::compare(reports, threshold);
  micromix::write_csv(micromix::comparison_to_csv(cr), out_path);
  std::cout << "wrote " << out_path << "\n";
  for (size_t i = 0; i < cr.reports.size(); ++i) {
    std::cout << "  " << cr.reports[i].variant << ": first period with fret >= "
              << threshold << ": ";
    if (cr.crossing_period[i] > 0)
      std::cout << cr.crossing_period[i] << "\n";
    else
      std::cout << "none\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"micromixer simulation pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = -1;
  bool force = false, stokes = false;
  app.add_option("--config", config_path, "run config (JSON)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--threads", threads, "worker thread count (0 = hardware)");
  app.add_flag("--force", force, "allow writing into a non-empty directory");
  app.add_flag("--stokes", stokes, "drop inertial terms in the flow solve");

  const char* stage_names[] = {"geometry", "flow",      "trace",
                               "topology", "transport", "report", "all"};
  const char* stage_help[] = {
      "voxelize the mixer geometry",
      "solve the steady velocity field",
      "advect the two-species particle ensemble",
      "extract critical points and vortices on slices",
      "solve species transport with the pair reaction",
      "assemble the per-period mixing report",
      "run every stage"};
  CLI::App* subs[7];
  for (int i = 0; i < 7; ++i) {
    subs[i] = app.add_subcommand(stage_names[i], stage_help[i]);
    subs[i]->fallthrough();
  }

  std::vector<std::string> compare_csvs;
  std::string compare_out = "comparison.csv";
  double compare_threshold = 0.8;
  subs[5]->add_option("--compare", compare_csvs,
                      "compare finished report CSVs instead of running");
  subs[5]->add_option("--compare-out", compare_out,
                      "comparison CSV output path");
  subs[5]->add_option("--crossing-threshold", compare_threshold,
                      "fret level defining the crossing period");

  CLI11_PARSE(app, argc, argv);

  try {
    for (int i = 0; i < 7; ++i)
      if (subs[i]->parsed()) {
        if (i == 5 && !compare_csvs.empty())
          return run_compare(compare_csvs, compare_out, compare_threshold);
        if (config_path.empty())
          throw std::runtime_error("--config is required");
        return run_stage(stage_names[i], config_path, out_dir, threads, force,
                         stokes);
      }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
