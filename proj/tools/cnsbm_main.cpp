// cnsbm: categorical bipartite block-model toolkit.
// Subcommands: simulate, fit, refine, evaluate, decompose.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cnsbm/decompose.hpp"
#include "cnsbm/io.hpp"
#include "cnsbm/metrics.hpp"
#include "cnsbm/refine.hpp"
#include "cnsbm/simgen.hpp"
#include "cnsbm/svi.hpp"

namespace {

using namespace cnsbm;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

CategoricalMatrix load_any(const std::string& path) {
  if (ends_with(path, ".json")) return matrix_from_json(load_json(path));
  return load_matrix(path, ends_with(path, ".tsv") ? FileFormat::Tsv : FileFormat::Csv);
}

void save_matrix(const CategoricalMatrix& m, const std::string& path) {
  if (ends_with(path, ".json")) {
    write_json_atomic(path, matrix_to_json(m));
  } else {
    write_text_atomic(path, matrix_to_csv(m, ends_with(path, ".tsv") ? '\t' : ','));
  }
}

// reproducibility metadata embedded in every JSON report
json run_metadata(std::uint64_t seed, const std::string& config_string) {
  return {{"seed", seed},
          {"config_hash", fnv1a(config_string)},
          {"version", kVersion},
          {"schema_version", kSchemaVersion}};
}

struct DataOptions {
  std::string input;
  int cap = 0;  // 0 = keep the loaded alphabet
  bool impute = false;
  bool impute_per_column = false;
  std::uint64_t impute_seed = 0;
  double holdout_fraction = 0.0;
  std::uint64_t holdout_seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--input", input, "input matrix (.csv/.tsv/.json)")->required();
    cmd->add_option("--cap", cap, "cap raw copy numbers at this value (n_cat = cap + 1)");
    cmd->add_flag("--impute", impute, "fill missing cells from the empirical marginal");
    cmd->add_flag("--impute-per-column", impute_per_column, "use per-column marginals");
    cmd->add_option("--impute-seed", impute_seed, "imputation RNG seed");
    cmd->add_option("--holdout-fraction", holdout_fraction,
                    "withhold this fraction of observed cells");
    cmd->add_option("--holdout-seed", holdout_seed, "holdout RNG seed");
  }

  struct Loaded {
    CategoricalMatrix train;
    HoldoutSplit split;  // empty when no holdout requested
    bool has_holdout = false;
  };

  Loaded load() const {
    Loaded out;
    CategoricalMatrix m = load_any(input);
    if (cap > 0) m = encode_copy_numbers(m, cap);
    if (impute) m = impute_marginal(m, impute_seed, impute_per_column);
    if (holdout_fraction > 0.0) {
      out.split = make_holdout(m, holdout_fraction, holdout_seed);
      out.has_holdout = true;
      m = apply_train_mask(m, out.split);
    }
    out.train = std::move(m);
    return out;
  }

  std::string fingerprint() const {
    return input + "|" + std::to_string(cap) + "|" + std::to_string(impute) + "|" +
           std::to_string(impute_seed) + "|" + std::to_string(holdout_fraction) + "|" +
           std::to_string(holdout_seed);
  }
};

struct FitOptions {
  StageConfig stage;
  std::string weights_mode = "none";
  std::string engine = "cavi";
  std::string init_name = "random";
  std::string spectral_name = "log";
  SviConfig svi;
  bool no_phi = false;
  bool deterministic = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--K", stage.K, "number of row clusters")->required();
    cmd->add_option("--L", stage.L, "number of column clusters")->required();
    cmd->add_option("--alpha", stage.priors.alpha_block, "block Dirichlet concentration");
    cmd->add_option("--alpha-row", stage.priors.alpha_row, "row-proportion concentration");
    cmd->add_option("--alpha-col", stage.priors.alpha_col, "column-proportion concentration");
    cmd->add_option("--tol", stage.fit.tol, "ELBO convergence threshold");
    cmd->add_option("--max-iters", stage.fit.max_iters, "maximum CAVI sweeps");
    cmd->add_option("--init", init_name, "initializer: random, kmeans, spectral")
        ->check(CLI::IsMember({"random", "kmeans", "spectral"}));
    cmd->add_option("--spectral-variant", spectral_name, "spectral input transform: log, bist")
        ->check(CLI::IsMember({"log", "bist"}));
    cmd->add_option("--spectral-components", stage.spectral_components,
                    "SVD rank (0 = min(K, L))");
    cmd->add_option("--seed", stage.seed, "initialization seed");
    cmd->add_option("--weights", weights_mode, "missing-data weighting: none, ipw")
        ->check(CLI::IsMember({"none", "ipw"}));
    cmd->add_option("--engine", engine, "inference engine: cavi, svi")
        ->check(CLI::IsMember({"cavi", "svi"}));
    cmd->add_option("--batch-rows", svi.batch_rows, "SVI row batch size");
    cmd->add_option("--batch-cols", svi.batch_cols, "SVI column batch size");
    cmd->add_option("--kappa", svi.kappa, "SVI forgetting rate");
    cmd->add_option("--tau", svi.tau, "SVI step-size delay");
    cmd->add_option("--eval-every", svi.eval_every, "SVI ELBO evaluation interval");
    cmd->add_option("--max-steps", svi.max_steps, "maximum SVI steps");
    cmd->add_option("--threads", stage.fit.threads, "worker threads for the update stages")
        ->default_val(std::getenv("CNSBM_THREADS") ? std::atoi(std::getenv("CNSBM_THREADS")) : 1);
    cmd->add_flag("--no-phi", no_phi, "omit phi arrays from the model JSON");
    cmd->add_flag("--deterministic", deterministic, "fixed-order reductions");
  }

  void finalize() {
    stage.init = init_name == "kmeans"    ? InitKind::Kmeans
                 : init_name == "spectral" ? InitKind::Spectral
                                           : InitKind::Random;
    stage.spectral_variant =
        spectral_name == "bist" ? SpectralVariant::Bistochastic : SpectralVariant::Log;
    stage.fit.weighted = weights_mode == "ipw";
    stage.fit.deterministic_reduction = deterministic;
    svi.tol = stage.fit.tol;
    svi.threads = stage.fit.threads;
  }

  WeightMatrix make_weights(const CategoricalMatrix& train) const {
    return weights_mode == "ipw" ? propensity_frequency(train) : WeightMatrix::observed(train);
  }

  std::string fingerprint() const {
    return std::to_string(stage.K) + "," + std::to_string(stage.L) + "," +
           std::to_string(stage.priors.alpha_block) + "," +
           std::to_string(stage.priors.alpha_row) + "," +
           std::to_string(stage.priors.alpha_col) + "," + std::to_string(stage.fit.tol) + "," +
           std::to_string(stage.fit.max_iters) + "," + init_name + "," + spectral_name + "," +
           weights_mode + "," + engine + "," + std::to_string(stage.seed);
  }
};

// kmeans/spectral need a complete matrix; impute a copy for the init only
VariationalState build_init(const CategoricalMatrix& train, const WeightMatrix& weights,
                            const StageConfig& cfg) {
  if (cfg.init == InitKind::Random)
    return init_random(train, weights, cfg.K, cfg.L, cfg.priors, cfg.seed);
  const CategoricalMatrix full = train.observed_count() == train.cells()
                                     ? train
                                     : impute_marginal(train, cfg.seed);
  if (cfg.init == InitKind::Kmeans)
    return init_kmeans(full, cfg.K, cfg.L, cfg.priors, cfg.seed);
  const int r = cfg.spectral_components > 0 ? cfg.spectral_components : std::min(cfg.K, cfg.L);
  return init_spectral(full, cfg.K, cfg.L, cfg.spectral_variant, r, cfg.priors, cfg.seed);
}

std::string trace_csv(const FitReport& report) {
  std::string out = "iteration,elbo\n";
  for (std::size_t t = 0; t < report.elbo_trace.size(); ++t)
    out += std::to_string(t + 1) + "," + std::to_string(report.elbo_trace[t]) + "\n";
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"CN-SBM: bipartite categorical block-model inference"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file mirroring the flags");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "sample a planted block-model instance");
  int sim_N = 100, sim_M = 200, sim_K = 4, sim_L = 6, sim_ncat = 12;
  double sim_sharpness = 0.9, sim_mcar = 0.0;
  std::uint64_t sim_seed = 0;
  std::string sim_out, sim_truth;
  sim->add_option("--N", sim_N, "rows");
  sim->add_option("--M", sim_M, "columns");
  sim->add_option("--K", sim_K, "row clusters");
  sim->add_option("--L", sim_L, "column clusters");
  sim->add_option("--n-cat", sim_ncat, "alphabet size");
  sim->add_option("--sharpness", sim_sharpness, "modal mass per block, in (0, 1]");
  sim->add_option("--mcar-rate", sim_mcar, "independent masking probability");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out", sim_out, "output matrix (.csv/.tsv/.json)")->required();
  sim->add_option("--truth", sim_truth, "output planted-truth JSON");

  // ---- fit ----
  auto* fit_cmd = app.add_subcommand("fit", "fit the block model by CAVI or SVI");
  DataOptions fit_data;
  FitOptions fit_opts;
  std::string fit_out = "model.json", fit_trace;
  fit_data.attach(fit_cmd);
  fit_opts.attach(fit_cmd);
  fit_cmd->add_option("--out", fit_out, "output model JSON");
  fit_cmd->add_option("--trace", fit_trace, "output ELBO trace CSV");

  // ---- refine ----
  auto* ref = app.add_subcommand("refine", "ICL/ELBO-guided split-merge search");
  DataOptions ref_data;
  std::string ref_model, ref_out = "refined.json", ref_criterion = "icl";
  int ref_budget = 20, ref_min_rows = 5, ref_min_cols = 10;
  std::uint64_t ref_seed = 0;
  ref_data.attach(ref);
  ref->add_option("--model", ref_model, "fitted model JSON")->required();
  ref->add_option("--budget", ref_budget, "maximum accepted moves");
  ref->add_option("--criterion", ref_criterion, "acceptance criterion: elbo, icl")
      ->check(CLI::IsMember({"elbo", "icl"}));
  ref->add_option("--min-rows", ref_min_rows, "row-cluster size merge threshold");
  ref->add_option("--min-cols", ref_min_cols, "column-cluster size merge threshold");
  ref->add_option("--seed", ref_seed, "split RNG seed");
  ref->add_option("--out", ref_out, "output refined model JSON");

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "held-out and fit metrics for a model");
  DataOptions ev_data;
  std::string ev_model, ev_out;
  ev_data.attach(ev);
  ev->add_option("--model", ev_model, "fitted model JSON")->required();
  ev->add_option("--out", ev_out, "output report JSON (default: stdout only)");

  // ---- decompose ----
  auto* dec = app.add_subcommand("decompose", "two-stage main/residual decomposition");
  DataOptions dec_data;
  FitOptions dec_opts;
  int dec_s2K = 8, dec_s2L = 10, dec_min_rows = 0;
  std::string dec_exclude, dec_prefix = "decomp";
  dec_data.attach(dec);
  dec_opts.attach(dec);
  dec->add_option("--stage2-K", dec_s2K, "stage-2 row clusters");
  dec->add_option("--stage2-L", dec_s2L, "stage-2 column clusters");
  dec->add_option("--exclude-chrom", dec_exclude, "chromosome excluded from stage 2");
  dec->add_option("--min-cluster-rows", dec_min_rows,
                  "drop stage-1 clusters smaller than this before stage 2");
  dec->add_option("--out-prefix", dec_prefix, "output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help or the usage error
    return rc == 0 ? 0 : 1;
  }

  if (sim->parsed()) {
    auto [data, truth] = sample_block_model(sim_N, sim_M, sim_K, sim_L, sim_ncat, sim_sharpness,
                                            sim_seed);
    if (sim_mcar > 0.0) data = apply_mcar_mask(data, sim_mcar, sim_seed + 1);
    save_matrix(data, sim_out);
    if (!sim_truth.empty()) {
      json j = truth_to_json(truth);
      j["meta"] = run_metadata(sim_seed, sim_out + std::to_string(sim_N) + "x" +
                                             std::to_string(sim_M));
      write_json_atomic(sim_truth, j);
    }
    return 0;
  }

  if (fit_cmd->parsed()) {
    fit_opts.finalize();
    auto loaded = fit_data.load();
    const WeightMatrix weights = fit_opts.make_weights(loaded.train);
    VariationalState init_state = build_init(loaded.train, weights, fit_opts.stage);
    VariationalState state;
    FitReport report;
    if (fit_opts.engine == "svi") {
      std::tie(state, report) =
          fit_svi(loaded.train, weights, fit_opts.stage.priors, std::move(init_state),
                  fit_opts.svi, fit_opts.stage.seed);
    } else {
      std::tie(state, report) = fit(loaded.train, weights, fit_opts.stage.priors,
                                    std::move(init_state), fit_opts.stage.fit);
    }
    json model = state_to_json(state, fit_opts.stage.priors, !fit_opts.no_phi);
    model["meta"] = run_metadata(fit_opts.stage.seed,
                                 fit_data.fingerprint() + ";" + fit_opts.fingerprint());
    if (fit_opts.deterministic) report.wall_time = 0.0;  // keep output byte-stable
    model["report"] = report_to_json(report);
    model["weights"] = fit_opts.weights_mode;
    write_json_atomic(fit_out, model);
    if (!fit_trace.empty()) write_text_atomic(fit_trace, trace_csv(report));
    std::cout << "fit: " << report.iterations << " iterations, converged="
              << (report.converged ? "true" : "false")
              << ", final ELBO=" << report.elbo_trace.back() << "\n";
    return 0;
  }

  if (ref->parsed()) {
    auto loaded = ref_data.load();
    auto [state, priors] = state_from_json(load_json(ref_model));
    const auto criterion =
        ref_criterion == "elbo" ? RefineCriterion::Elbo : RefineCriterion::Icl;
    auto result = refine_search(loaded.train, std::move(state), priors, ref_budget, criterion,
                                ref_min_rows, ref_min_cols, ref_seed);
    json out = state_to_json(result.state, priors);
    out["meta"] = run_metadata(ref_seed, ref_data.fingerprint() + ";" + ref_model + ";" +
                                             ref_criterion + ";" + std::to_string(ref_budget));
    out["refine"] = {{"accepted_moves", result.accepted_moves},
                     {"criterion_trace", result.criterion_trace},
                     {"icl", result.score.icl},
                     {"K_eff", result.score.K_eff},
                     {"L_eff", result.score.L_eff}};
    write_json_atomic(ref_out, out);
    std::cout << "refine: " << result.accepted_moves << " accepted moves, K_eff="
              << result.score.K_eff << ", L_eff=" << result.score.L_eff << "\n";
    return 0;
  }

  if (ev->parsed()) {
    auto loaded = ev_data.load();
    auto [state, priors] = state_from_json(load_json(ev_model));
    if (state.N != loaded.train.n_rows || state.M != loaded.train.n_cols)
      throw ShapeError("evaluate: model and matrix dimensions disagree");
    const auto hard = map_assignments(state);
    const auto blocks = empirical_blocks(loaded.train, hard, state.K, state.L);
    const auto score = icl(loaded.train, state, priors);
    json report;
    report["meta"] = run_metadata(ev_data.holdout_seed, ev_data.fingerprint() + ";" + ev_model);
    report["probability_floor"] = 1e-10;
    report["weighted_entropy"] = weighted_entropy(loaded.train, hard, state.K, state.L);
    report["icl"] = score.icl;
    report["K_eff"] = score.K_eff;
    report["L_eff"] = score.L_eff;
    if (loaded.has_holdout) {
      report["heldout_loglik"] = heldout_loglik(loaded.split, hard, blocks);
      report["heldout_accuracy"] = heldout_accuracy(loaded.split, hard, blocks);
      report["heldout_cells"] = loaded.split.heldout.size();
    }
    std::cout << report.dump(2) << "\n";
    if (!ev_out.empty()) write_json_atomic(ev_out, report);
    return 0;
  }

  if (dec->parsed()) {
    dec_opts.finalize();
    auto loaded = dec_data.load();
    StageConfig s2 = dec_opts.stage;
    s2.K = dec_s2K;
    s2.L = dec_s2L;
    std::function<bool(const BinMeta&)> exclude;
    if (!dec_exclude.empty())
      exclude = [&dec_exclude](const BinMeta& b) { return b.chromosome == dec_exclude; };
    const auto result = two_stage(loaded.train, dec_opts.stage, s2, exclude, dec_min_rows);

    CategoricalMatrix main_m = loaded.train;
    main_m.codes = result.main_codes;
    std::fill(main_m.mask.begin(), main_m.mask.end(), std::uint8_t{1});
    save_matrix(main_m, dec_prefix + "_main.csv");
    save_matrix(result.residual_cat, dec_prefix + "_residual.csv");

    const json meta = run_metadata(dec_opts.stage.seed,
                                   dec_data.fingerprint() + ";" + dec_opts.fingerprint() + ";" +
                                       dec_exclude);
    json m1 = state_to_json(result.stage1, dec_opts.stage.priors);
    m1["meta"] = meta;
    m1["report"] = report_to_json(result.report1);
    write_json_atomic(dec_prefix + "_stage1.json", m1);
    json m2 = state_to_json(result.stage2, s2.priors);
    m2["meta"] = meta;
    m2["report"] = report_to_json(result.report2);
    m2["residual_offset"] = result.residual_offset;
    m2["excluded_cols"] = result.excluded_cols;
    m2["kept_rows"] = result.kept_rows;
    write_json_atomic(dec_prefix + "_stage2.json", m2);

    // assignment table for downstream tooling
    std::string table = "row_id,stage1_cluster,stage2_cluster\n";
    std::vector<int> stage2_of_row(loaded.train.n_rows, -1);
    for (std::size_t a = 0; a < result.kept_rows.size(); ++a)
      stage2_of_row[result.kept_rows[a]] = result.stage2_hard.g[a];
    for (int i = 0; i < loaded.train.n_rows; ++i) {
      table += loaded.train.row_ids[i] + "," + std::to_string(result.stage1_hard.g[i]) + "," +
               (stage2_of_row[i] >= 0 ? std::to_string(stage2_of_row[i]) : std::string("NA")) +
               "\n";
    }
    write_text_atomic(dec_prefix + "_assignments.csv", table);
    std::cout << "decompose: stage-2 matrix " << result.kept_rows.size() << "x"
              << result.stage2_cols.size() << ", residual offset " << result.residual_offset
              << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cnsbm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
