// Copyright 2026 The Voxelseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// voxelseg CLI: phantom generation, signed distance transforms, centroid
// clustering, loss gradient checks, evaluation, the three-stage pipeline with
// oracle predictors, and the B/C/CM/CMS ablation harness.
//
// Exit codes: 0 success, 2 usage error, 3 I/O error, 4 domain error (the
// category is reported as machine-readable JSON on stderr).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxelseg/clustering.hpp"
#include "voxelseg/error.hpp"
#include "voxelseg/losscheck.hpp"
#include "voxelseg/metrics.hpp"
#include "voxelseg/oracle.hpp"
#include "voxelseg/parallel.hpp"
#include "voxelseg/phantom.hpp"
#include "voxelseg/pipeline.hpp"
#include "voxelseg/sdt.hpp"
#include "voxelseg/volume.hpp"
#include "voxelseg/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace voxelseg;

namespace {

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
}

json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path.string());
  try {
    json j;
    f >> j;
    return j;
  } catch (const json::exception& e) {
    throw IoError("malformed JSON " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// phantom gen
// ---------------------------------------------------------------------------

struct PhantomGenArgs {
  std::string out_dir;
  PhantomConfig cfg;
};

json phantom_config_to_json(const PhantomConfig& c) {
  return json{{"tooth_count", c.tooth_count},
              {"arch_semi_axis_x_mm", c.arch_semi_axis_x_mm},
              {"arch_semi_axis_y_mm", c.arch_semi_axis_y_mm},
              {"crown_radius_mm", {c.crown_radius_min_mm, c.crown_radius_max_mm}},
              {"crown_half_height_mm",
               {c.crown_half_height_min_mm, c.crown_half_height_max_mm}},
              {"root_length_mm", {c.root_length_min_mm, c.root_length_max_mm}},
              {"crown_exponent", {c.crown_exponent_min, c.crown_exponent_max}},
              {"gap_mm", c.gap_mm},
              {"levels", {c.background_level, c.bone_level, c.tooth_level}},
              {"blur_sigma_mm", c.blur_sigma_mm},
              {"noise_sigma", c.noise_sigma},
              {"spacing_mm", {c.spacing.x, c.spacing.y, c.spacing.z}},
              {"margin_mm", c.margin_mm},
              {"fixed_dims", c.fixed_dims},
              {"seed", c.seed}};
}

void write_phantom_case(const fs::path& dir, const PhantomCase& pc) {
  fs::create_directories(dir);
  write_volume(dir / "image", pc.image);
  write_volume(dir / "labels", pc.labels);
  json centroids = json::array();
  for (std::size_t k = 0; k < pc.centroids.size(); ++k)
    centroids.push_back({{"id", k + 1},
                         {"pos_mm",
                          {pc.centroids[k].x, pc.centroids[k].y, pc.centroids[k].z}}});
  write_json_file(dir / "centroids.json", centroids);
  json adjacency = json::array();
  for (const auto& [a, b] : pc.adjacency) adjacency.push_back({a, b});
  write_json_file(dir / "adjacency.json", adjacency);
  write_json_file(dir / "config.json", phantom_config_to_json(pc.config));
}

int run_phantom_gen(const PhantomGenArgs& a) {
  PhantomCase pc = generate_phantom(a.cfg);
  write_phantom_case(a.out_dir, pc);
  std::printf("phantom: %d teeth, dims %dx%dx%d, %zu adjacent pairs -> %s\n",
              a.cfg.tooth_count, pc.labels.nx(), pc.labels.ny(), pc.labels.nz(),
              pc.adjacency.size(), a.out_dir.c_str());
  return 0;
}

/// Rebuilds an in-memory case from a phantom directory (centroids are
/// recomputed from the labels, which reproduces generate_phantom exactly).
PhantomCase load_phantom_case(const fs::path& dir) {
  PhantomCase pc;
  pc.image = read_image_volume(dir / "image");
  pc.labels = read_label_volume(dir / "labels");
  std::uint16_t max_id = 0;
  for (std::size_t i = 0; i < pc.labels.size(); ++i)
    max_id = std::max(max_id, pc.labels.flat(i));
  if (max_id == 0) throw Error("EmptyGroundTruth", "labels volume has no instances");
  std::vector<Vec3> sums(max_id, Vec3{});
  std::vector<std::size_t> counts(max_id, 0);
  for (int z = 0; z < pc.labels.nz(); ++z)
    for (int y = 0; y < pc.labels.ny(); ++y)
      for (int x = 0; x < pc.labels.nx(); ++x) {
        std::uint16_t id = pc.labels(x, y, z);
        if (!id) continue;
        sums[id - 1] = sums[id - 1] + pc.labels.voxel_center(x, y, z);
        ++counts[id - 1];
      }
  for (std::uint16_t k = 0; k < max_id; ++k) {
    if (!counts[k])
      throw Error("EmptyGroundTruth", "label ids must be contiguous 1..K");
    pc.centroids.push_back(sums[k] * (1.0 / static_cast<double>(counts[k])));
  }
  return pc;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

void write_case_report_csv(const fs::path& path, const CaseReport& rep) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << "gt_id,pred_id,dice,jaccard,hd_mm,asd_mm\n";
  char line[256];
  for (const auto& m : rep.matches) {
    std::snprintf(line, sizeof line, "%u,%u,%.6f,%.6f,%.6f,%.6f\n", m.gt_id,
                  m.pred_id, m.overlap.dice, m.overlap.jaccard, m.surface.hd_mm,
                  m.surface.asd_mm);
    f << line;
  }
  for (auto g : rep.missed_gt) f << g << ",,0,0,,\n";
  for (auto p : rep.spurious_pred) f << "," << p << ",0,0,,\n";
}

int run_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& out_path, const std::string& csv_path, bool hd95) {
  LabelGrid pred = read_label_volume(pred_path);
  LabelGrid gt = read_label_volume(gt_path);
  CaseReport rep = evaluate_case(pred, gt, hd95);
  std::printf("instances: %zu matched, %zu missed, %zu spurious\n",
              rep.matches.size(), rep.missed_gt.size(), rep.spurious_pred.size());
  std::printf("Dice / Jaccard / HD (mm) / ASD (mm): %s\n", rep.format_means().c_str());
  if (!out_path.empty()) write_json_file(out_path, case_report_to_json(rep));
  if (!csv_path.empty()) write_case_report_csv(csv_path, rep);
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline run
// ---------------------------------------------------------------------------

struct PipelineRunArgs {
  std::string case_dir, out_dir, config_path;
  std::string mode = "perfect";
  std::string variant;
  double sigma = 0.5, blur_mm = 0.0, grow_mm = 0.8;
  std::uint64_t seed = 0;
  PipelineConfig cfg;
  bool has_patch = false, has_radius = false, has_tau = false, has_rho = false,
       has_delta = false;
  int patch_size = 64, prompt_radius = 2;
  double tau = 0.0, delta_min = kDefaultDeltaMinMm;
  std::uint32_t rho_min = 0;
  bool has_prompt = false, has_multilabel = false, has_shape = false;
  bool toggle_prompt = true, toggle_multilabel = true, toggle_shape = true;
  bool has_mu1 = false, has_mu2 = false, has_l0 = false, has_l1 = false,
       has_l2 = false;
  double mu1 = 0.5, mu2 = 0.5, l0 = 0.1, l1 = 0.4, l2 = 0.4;
};

OracleMode parse_oracle_mode(const PipelineRunArgs& a) {
  if (a.mode == "perfect") return OracleMode::perfect();
  if (a.mode == "noisy") return OracleMode::noisy(a.sigma, a.blur_mm, a.seed);
  if (a.mode == "adhesion") return OracleMode::adhesion(a.grow_mm);
  throw Error("BadConfig", "unknown mode '" + a.mode + "' (perfect|noisy|adhesion)");
}

int run_pipeline_cmd(PipelineRunArgs& a) {
  if (!a.config_path.empty()) a.cfg = read_json_file(a.config_path).get<PipelineConfig>();
  if (!a.variant.empty()) a.cfg.toggles = variant_toggles(a.variant);
  if (a.has_prompt) a.cfg.toggles.centroid_prompt = a.toggle_prompt;
  if (a.has_multilabel) a.cfg.toggles.multilabel = a.toggle_multilabel;
  if (a.has_shape) a.cfg.toggles.shape = a.toggle_shape;
  if (a.has_patch) a.cfg.patch_size = a.patch_size;
  if (a.has_radius) a.cfg.prompt_radius = a.prompt_radius;
  if (a.has_tau) a.cfg.fusion_tau = a.tau;
  if (a.has_rho) a.cfg.rho_min = a.rho_min;
  if (a.has_delta) a.cfg.delta_min_mm = a.delta_min;
  if (a.has_mu1) a.cfg.weights.mu1 = a.mu1;
  if (a.has_mu2) a.cfg.weights.mu2 = a.mu2;
  if (a.has_l0) a.cfg.weights.lambda0 = a.l0;
  if (a.has_l1) a.cfg.weights.lambda1 = a.l1;
  if (a.has_l2) a.cfg.weights.lambda2 = a.l2;

  PhantomCase pc = load_phantom_case(a.case_dir);
  OracleMode mode = parse_oracle_mode(a);
  auto dent = make_oracle_dentition_predictor(pc);
  auto off = make_oracle_offset_predictor(pc);
  auto tooth = make_oracle_tooth_predictor(pc, mode, a.cfg.toggles);

  PipelineResult res = run_pipeline(pc.image, *dent, *off, *tooth, a.cfg);
  CaseReport rep = evaluate_case(res.labels, pc.labels);

  fs::create_directories(a.out_dir);
  fs::path out(a.out_dir);
  write_volume(out / "labels_pred", res.labels);
  write_json_file(out / "centroids_pred.json", centroid_set_to_json(res.centroids));
  json cfg_json;
  to_json(cfg_json, a.cfg);
  write_json_file(out / "report.json",
                  json{{"mode", a.mode},
                       {"config", cfg_json},
                       {"centroid_count", res.centroids.size()},
                       {"stitch_conflicts", res.stitch_conflicts},
                       {"evaluation", case_report_to_json(rep)}});
  std::printf("centroids: %zu, stitch conflicts: %zu\n", res.centroids.size(),
              res.stitch_conflicts);
  std::printf("Dice / Jaccard / HD (mm) / ASD (mm): %s\n", rep.format_means().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string out_dir;
  int cases = 20;
  int teeth = 14;
  double gap_mm = 0.6, grow_mm = 0.8;
  std::uint64_t seed0 = 0;
  PipelineConfig cfg;
};

struct VariantStats {
  std::string name;
  double dice = 0, jaccard = 0, hd = 0, asd = 0;
  std::size_t conflicts = 0;
  int cases = 0;
};

int run_ablate(const AblateArgs& a) {
  const char* variants[4] = {"B", "C", "CM", "CMS"};
  std::vector<VariantStats> stats(4);
  json per_case = json::array();

  for (int i = 0; i < a.cases; ++i) {
    PhantomConfig pcfg;
    pcfg.tooth_count = a.teeth;
    pcfg.gap_mm = a.gap_mm;
    pcfg.seed = a.seed0 + static_cast<std::uint64_t>(i);
    PhantomCase pc = generate_phantom(pcfg);
    auto dent = make_oracle_dentition_predictor(pc);
    auto off = make_oracle_offset_predictor(pc);

    for (int v = 0; v < 4; ++v) {
      PipelineConfig cfg = a.cfg;
      cfg.toggles = variant_toggles(variants[v]);
      auto tooth =
          make_oracle_tooth_predictor(pc, OracleMode::adhesion(a.grow_mm), cfg.toggles);
      PipelineResult res = run_pipeline(pc.image, *dent, *off, *tooth, cfg);
      CaseReport rep = evaluate_case(res.labels, pc.labels);
      stats[v].name = variants[v];
      stats[v].dice += rep.mean_dice;
      stats[v].jaccard += rep.mean_jaccard;
      stats[v].hd += rep.mean_hd_mm;
      stats[v].asd += rep.mean_asd_mm;
      stats[v].conflicts += res.stitch_conflicts;
      stats[v].cases += 1;
      per_case.push_back({{"seed", pcfg.seed},
                          {"variant", variants[v]},
                          {"dice", rep.mean_dice},
                          {"jaccard", rep.mean_jaccard},
                          {"hd_mm", rep.mean_hd_mm},
                          {"asd_mm", rep.mean_asd_mm},
                          {"stitch_conflicts", res.stitch_conflicts},
                          {"missed", rep.missed_gt.size()}});
    }
  }

  json variants_json = json::array();
  std::printf("%-8s %-8s %-8s %-9s %-9s %s\n", "Model", "Dice", "Jaccard", "HD (mm)",
              "ASD (mm)", "Conflicts");
  for (auto& s : stats) {
    double n = s.cases;
    s.dice /= n;
    s.jaccard /= n;
    s.hd /= n;
    s.asd /= n;
    std::printf("%-8s %-8.4f %-8.4f %-9.4f %-9.4f %zu\n", (s.name + "-Net").c_str(),
                s.dice, s.jaccard, s.hd, s.asd, s.conflicts);
    variants_json.push_back({{"name", s.name},
                             {"mean_dice", s.dice},
                             {"mean_jaccard", s.jaccard},
                             {"mean_hd_mm", s.hd},
                             {"mean_asd_mm", s.asd},
                             {"stitch_conflicts", s.conflicts}});
  }
  bool ordering_ok = stats[0].dice <= stats[1].dice && stats[1].dice <= stats[2].dice &&
                     stats[2].dice <= stats[3].dice;
  double cms_minus_b = stats[3].dice - stats[0].dice;
  std::printf("dice ordering B <= C <= CM <= CMS: %s (CMS - B = %.4f)\n",
              ordering_ok ? "yes" : "NO", cms_minus_b);

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_json_file(fs::path(a.out_dir) / "ablation.json",
                    json{{"cases", a.cases},
                         {"teeth", a.teeth},
                         {"gap_mm", a.gap_mm},
                         {"grow_mm", a.grow_mm},
                         {"seed0", a.seed0},
                         {"variants", variants_json},
                         {"dice_ordering_ok", ordering_ok},
                         {"cms_minus_b_dice", cms_minus_b},
                         {"per_case", per_case}});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxelseg: shape-aware tooth instance segmentation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may appear after the subcommand
  int threads = 0;
  app.add_option("--threads", threads,
                 "cap internal parallelism (default: VOXELSEG_THREADS or all cores)");

  // phantom gen
  auto* phantom_cmd = app.add_subcommand("phantom", "synthetic phantom tools");
  phantom_cmd->require_subcommand(1);
  auto* gen = phantom_cmd->add_subcommand("gen", "generate a dental-arch phantom");
  PhantomGenArgs ga;
  gen->add_option("--out", ga.out_dir, "output directory")->required();
  gen->add_option("--seed", ga.cfg.seed, "RNG seed");
  gen->add_option("--teeth", ga.cfg.tooth_count, "tooth count (default 14)");
  gen->add_option("--gap", ga.cfg.gap_mm, "interdental gap in mm (default 0.6)");
  double spacing_mm = 0.4;
  auto* sp_opt = gen->add_option("--spacing", spacing_mm, "isotropic spacing in mm");
  gen->add_option("--blur", ga.cfg.blur_sigma_mm, "image blur sigma in mm");
  gen->add_option("--noise", ga.cfg.noise_sigma, "additive noise sigma");
  gen->add_option("--dims", ga.cfg.fixed_dims, "force a cubic grid of this many voxels");

  // sdt
  auto* sdt_cmd = app.add_subcommand("sdt", "signed distance map of a binary mask");
  std::string sdt_in, sdt_out;
  sdt_cmd->add_option("--in", sdt_in, "input binary mask volume")->required();
  sdt_cmd->add_option("--out", sdt_out, "output distance volume")->required();

  // cluster
  auto* cluster_cmd =
      app.add_subcommand("cluster", "density-peak centroids from offset votes");
  std::string cl_offsets, cl_fg, cl_out;
  std::uint32_t cl_rho = 0;
  double cl_delta = kDefaultDeltaMinMm;
  cluster_cmd->add_option("--offsets", cl_offsets, "offset volume")->required();
  cluster_cmd->add_option("--fg", cl_fg, "binary foreground volume")->required();
  cluster_cmd->add_option("--out", cl_out, "output centroids JSON")->required();
  cluster_cmd->add_option("--rho-min", cl_rho, "density threshold (0 = auto)");
  cluster_cmd->add_option("--delta-min", cl_delta, "separation threshold in mm");

  // assign
  auto* assign_cmd =
      app.add_subcommand("assign", "nearest-centroid instance labels");
  std::string as_fg, as_centroids, as_out;
  assign_cmd->add_option("--fg", as_fg, "binary foreground volume")->required();
  assign_cmd->add_option("--centroids", as_centroids, "centroids JSON")->required();
  assign_cmd->add_option("--out", as_out, "output label volume")->required();

  // losscheck
  auto* loss_cmd =
      app.add_subcommand("losscheck", "finite-difference gradient verification");
  int lc_trials = 50;
  std::uint64_t lc_seed = 0;
  double lc_step = 1e-3;
  std::string lc_out;
  loss_cmd->add_option("--trials", lc_trials, "random instances per loss");
  loss_cmd->add_option("--seed", lc_seed, "RNG seed");
  loss_cmd->add_option("--step", lc_step, "finite-difference step");
  loss_cmd->add_option("--out", lc_out, "output JSON report");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "per-instance segmentation metrics");
  std::string ev_pred, ev_gt, ev_out, ev_csv;
  bool ev_hd95 = false;
  eval_cmd->add_option("--pred", ev_pred, "predicted label volume")->required();
  eval_cmd->add_option("--gt", ev_gt, "ground-truth label volume")->required();
  eval_cmd->add_option("--out", ev_out, "output JSON report");
  eval_cmd->add_option("--csv", ev_csv, "per-instance CSV rows");
  eval_cmd->add_flag("--hd95", ev_hd95, "also report the 95th-percentile HD");

  // pipeline run
  auto* pipe_cmd = app.add_subcommand("pipeline", "three-stage pipeline");
  pipe_cmd->require_subcommand(1);
  auto* pr = pipe_cmd->add_subcommand("run", "run on a phantom case with oracles");
  PipelineRunArgs pa;
  pr->add_option("--case", pa.case_dir, "phantom case directory")->required();
  pr->add_option("--out", pa.out_dir, "output directory")->required();
  pr->add_option("--mode", pa.mode, "oracle mode: perfect|noisy|adhesion");
  pr->add_option("--sigma", pa.sigma, "logit noise sigma (noisy mode)");
  pr->add_option("--blur", pa.blur_mm, "probability blur in mm (noisy mode)");
  pr->add_option("--grow", pa.grow_mm, "dilation in mm (adhesion mode)");
  pr->add_option("--seed", pa.seed, "noise seed (noisy mode)");
  pr->add_option("--config", pa.config_path, "pipeline config JSON");
  pr->add_option("--variant", pa.variant, "toggle preset B|C|CM|CMS");
  pr->add_option("--patch-size", pa.patch_size, "patch size in voxels")
      ->each([&](const std::string&) { pa.has_patch = true; });
  pr->add_option("--prompt-radius", pa.prompt_radius, "prompt ball radius in voxels")
      ->each([&](const std::string&) { pa.has_radius = true; });
  pr->add_option("--tau", pa.tau, "SDM fusion threshold")
      ->each([&](const std::string&) { pa.has_tau = true; });
  pr->add_option("--rho-min", pa.rho_min, "density threshold (0 = auto)")
      ->each([&](const std::string&) { pa.has_rho = true; });
  pr->add_option("--delta-min", pa.delta_min, "separation threshold in mm")
      ->each([&](const std::string&) { pa.has_delta = true; });
  pr->add_flag("--prompt,!--no-prompt", pa.toggle_prompt,
               "centroid prompt toggle (overrides --variant)")
      ->each([&](const std::string&) { pa.has_prompt = true; });
  pr->add_flag("--multilabel,!--no-multilabel", pa.toggle_multilabel,
               "multilabel toggle (overrides --variant)")
      ->each([&](const std::string&) { pa.has_multilabel = true; });
  pr->add_flag("--shape,!--no-shape", pa.toggle_shape,
               "shape-fusion toggle (overrides --variant)")
      ->each([&](const std::string&) { pa.has_shape = true; });
  pr->add_option("--mu1", pa.mu1, "Dice weight in the combined seg loss")
      ->each([&](const std::string&) { pa.has_mu1 = true; });
  pr->add_option("--mu2", pa.mu2, "cross-entropy weight in the combined seg loss")
      ->each([&](const std::string&) { pa.has_mu2 = true; });
  pr->add_option("--lambda0", pa.l0, "dentition shape-loss weight")
      ->each([&](const std::string&) { pa.has_l0 = true; });
  pr->add_option("--lambda1", pa.l1, "boundary-loss weight")
      ->each([&](const std::string&) { pa.has_l1 = true; });
  pr->add_option("--lambda2", pa.l2, "shape-loss weight")
      ->each([&](const std::string&) { pa.has_l2 = true; });

  // ablate
  auto* ab_cmd = app.add_subcommand(
      "ablate", "run B/C/CM/CMS on an adhesion phantom suite");
  AblateArgs aa;
  ab_cmd->add_option("--out", aa.out_dir, "output directory for ablation.json");
  ab_cmd->add_option("--cases", aa.cases, "number of seeded phantoms (default 20)");
  ab_cmd->add_option("--teeth", aa.teeth, "teeth per phantom (default 14)");
  ab_cmd->add_option("--gap", aa.gap_mm, "phantom gap in mm (default 0.6)");
  ab_cmd->add_option("--grow", aa.grow_mm, "adhesion dilation in mm (default 0.8)");
  ab_cmd->add_option("--seed0", aa.seed0, "first seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) par::set_max_threads(threads);

  try {
    if (*gen) {
      if (sp_opt->count()) ga.cfg.spacing = Spacing::isotropic(spacing_mm);
      return run_phantom_gen(ga);
    }
    if (*sdt_cmd) {
      MaskGrid mask = to_binary_mask(read_label_volume(sdt_in));
      Grid<double> sdm = signed_distance_map(mask);
      write_volume(sdt_out, sdm);
      std::printf("sdm written to %s\n", sdt_out.c_str());
      return 0;
    }
    if (*cluster_cmd) {
      OffsetGrid offsets = read_offset_volume(cl_offsets);
      MaskGrid fg = to_binary_mask(read_label_volume(cl_fg));
      DensityGrid density = vote_density(offsets, fg);
      std::uint32_t rho = cl_rho ? cl_rho : auto_rho_min(density);
      CentroidSet peaks = density_peaks(density, rho, cl_delta);
      write_json_file(cl_out, centroid_set_to_json(peaks));
      std::printf("%zu centroids (rho_min=%u, delta_min=%.2f mm) -> %s\n",
                  peaks.size(), rho, cl_delta, cl_out.c_str());
      return 0;
    }
    if (*assign_cmd) {
      MaskGrid fg = to_binary_mask(read_label_volume(as_fg));
      CentroidSet cs = centroid_set_from_json(read_json_file(as_centroids));
      LabelGrid labels = assign_instances(fg, cs);
      write_volume(as_out, labels);
      std::printf("labels written to %s\n", as_out.c_str());
      return 0;
    }
    if (*loss_cmd) {
      LossCheckReport rep = run_losscheck(lc_trials, lc_seed, lc_step);
      for (const auto& e : rep.entries)
        std::printf("%-26s max_rel_err %.3e (threshold %.0e) %s\n", e.name.c_str(),
                    e.max_rel_err, e.threshold, e.pass ? "ok" : "FAIL");
      if (!lc_out.empty()) write_json_file(lc_out, losscheck_report_to_json(rep));
      return rep.all_pass ? 0 : 1;
    }
    if (*eval_cmd) return run_eval(ev_pred, ev_gt, ev_out, ev_csv, ev_hd95);
    if (*pr) return run_pipeline_cmd(pa);
    if (*ab_cmd) return run_ablate(aa);
  } catch (const Error& e) {
    std::cerr << json{{"error", "DomainError"},
                      {"category", e.category()},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << json{{"error", "IoError"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}
