// hcfw: command-line driver for dataset generation, scenario splitting,
// online training, query encoding and evaluation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hcfw.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    std::istringstream v(item);
    T x;
    if (!(v >> x) || !v.eof()) {
      throw hcfw::InvalidArgument(std::string("bad ") + what + " list item \"" + item + "\"");
    }
    out.push_back(x);
  }
  return out;
}

std::string fingerprint_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string joined;
  for (const auto& f : files) {
    joined += f.filename().string() + ":" + hcfw::io::sha256_hex(hcfw::io::read_file(f)) + "\n";
  }
  return hcfw::io::sha256_hex(std::string_view(joined));
}

void write_json_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
}

struct EngineFlags {
  hcfw::Index bits = 32;
  double theta = 1.0;
  double delta = 1.0;
  double ridge = 1e-6;
  int iterations = 5;
  std::optional<hcfw::Index> anchors;
  std::optional<double> sigma;
  std::string kernel_modalities = "1";
  std::string supervision = "pseudo:0";
  std::uint64_t seed = 0;
  bool no_fine_grained = false;
  double weight_floor = 0.0;
  double early_stop = 0.0;

  void attach(CLI::App* app) {
    app->add_option("--bits", bits, "Code length r");
    app->add_option("--theta", theta, "Hash-function regularizer");
    app->add_option("--delta", delta, "Auxiliary-projection regularizer");
    app->add_option("--ridge", ridge, "Ridge added when solving W_c");
    app->add_option("--iters", iterations, "Alternating iterations for category codes");
    app->add_option("--anchors", anchors, "RBF anchor count (default min(500, first chunk))");
    app->add_option("--sigma", sigma, "RBF kernel width (default: estimated)");
    app->add_option("--kernel-modalities", kernel_modalities,
                    "Comma list of modality ids to kernelize, or 'none'");
    app->add_option("--supervision", supervision, "file:<path> | pseudo:<seed>[:<k>] | hadamard[:<k>]");
    app->add_option("--seed", seed, "Engine seed");
    app->add_flag("--no-fine-grained", no_fine_grained, "Use unit fusion weights");
    app->add_option("--weight-floor", weight_floor, "Constant added to every fusion weight");
    app->add_option("--early-stop", early_stop, "Relative objective tolerance (0 = off)");
  }

  hcfw::EngineConfig config(hcfw::Index first_chunk) const {
    hcfw::EngineConfig c;
    c.bits = bits;
    c.theta = theta;
    c.delta = delta;
    c.ridge = ridge;
    c.iterations = iterations;
    c.anchor_count = anchors ? *anchors : std::min<hcfw::Index>(500, std::max<hcfw::Index>(first_chunk, 1));
    c.sigma = sigma;
    c.kernelized_modalities = kernel_modalities == "none" ? std::vector<int>{}
                                                          : parse_list<int>(kernel_modalities, "modality");
    c.supervision = supervision;
    c.seed = seed;
    c.fine_grained = !no_fine_grained;
    c.weight_floor = weight_floor;
    c.early_stop_tol = early_stop;
    c.validate();
    return c;
  }
};

int cmd_generate(const fs::path& out, const hcfw::SyntheticConfig& cfg) {
  const auto ds = hcfw::generate_synthetic(cfg);
  hcfw::io::save_dataset(out, ds);
  std::cout << json{{"dataset", out.string()},
                    {"n", ds.size()},
                    {"categories", ds.categories.size()},
                    {"modalities", ds.modalities.size()}}
                   .dump()
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online multi-modal hashing with high-level codes and fine-grained fusion weights"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic multi-modal dataset directory");
  fs::path gen_out;
  hcfw::SyntheticConfig syn;
  std::string gen_dims = "64,32";
  std::string gen_card = "1";
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--n", syn.n_instances, "Number of instances");
  gen->add_option("--categories", syn.n_categories, "Number of categories");
  gen->add_option("--dims", gen_dims, "Per-modality dimensions, comma separated");
  gen->add_option("--cardinality", gen_card, "Label-count weights, e.g. 1:0.6,2:0.3,3:0.1");
  gen->add_option("--noise", syn.noise, "Gaussian noise standard deviation");
  gen->add_option("--noise-ratio", syn.noise_ratio, "Noise multiplier for one random modality per instance");
  gen->add_option("--latent-dim", syn.latent_dim, "Latent prototype dimension");
  gen->add_option("--seed", syn.seed, "Generator seed");

  // split
  auto* split = app.add_subcommand("split", "Write a scenario plan for a dataset");
  fs::path split_dataset, split_out;
  std::string split_kind = "iid";
  std::string chunk_sizes;
  int split_rounds = 5;
  hcfw::Index test_size = 200;
  double train_ratio = 0.9;
  std::uint64_t split_seed = 0;
  split->add_option("--dataset", split_dataset, "Dataset directory")->required();
  split->add_option("--out,--plan", split_out, "Plan file to write")->required();
  split->add_option("--kind", split_kind, "iid | overlap | non_overlap");
  split->add_option("--rounds", split_rounds, "Number of rounds");
  split->add_option("--chunk-sizes", chunk_sizes, "IID chunk sizes (default: equal split)");
  split->add_option("--test-size", test_size, "IID test-set size");
  split->add_option("--train-ratio", train_ratio, "Category-incremental train fraction");
  split->add_option("--seed", split_seed, "Split seed");

  // train
  auto* train = app.add_subcommand("train", "Train round by round over a plan");
  fs::path train_dataset, train_plan, train_state, train_report;
  std::string p_at_k = "100";
  EngineFlags train_flags;
  train->add_option("--dataset", train_dataset, "Dataset directory")->required();
  train->add_option("--plan", train_plan, "Plan file")->required();
  train->add_option("--state", train_state, "State directory (rewritten after every round)")->required();
  train->add_option("--report", train_report, "JSON-lines report file");
  train->add_option("--p-at-k", p_at_k, "Comma list of precision cutoffs");
  train_flags.attach(train);

  // encode
  auto* enc = app.add_subcommand("encode", "Encode query features with a saved state");
  fs::path enc_state, enc_queries, enc_out;
  bool enc_no_fg = false;
  enc->add_option("--state", enc_state, "State directory")->required();
  enc->add_option("--dataset,--queries", enc_queries, "Directory with modality_*.fmat")->required();
  enc->add_option("--out", enc_out, "Output code file (.imat)")->required();
  enc->add_flag("--no-fine-grained", enc_no_fg, "Use unit fusion weights");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score query codes against a database");
  fs::path ev_qcodes, ev_qlabels, ev_qcats, ev_state, ev_dbcodes, ev_dblabels, ev_out;
  std::optional<hcfw::Index> ev_cutoff;
  std::string ev_pk = "100";
  int ev_round = 0;
  ev->add_option("--query-codes", ev_qcodes, "Query codes (.imat)")->required();
  ev->add_option("--query-labels", ev_qlabels, "Query labels (.lmat)")->required();
  ev->add_option("--query-categories", ev_qcats,
                 "categories.json naming query label rows; remaps them to the state's registry");
  ev->add_option("--state", ev_state, "State directory providing the database");
  ev->add_option("--db-codes", ev_dbcodes, "Database codes (.imat)");
  ev->add_option("--db-labels", ev_dblabels, "Database labels (.lmat)");
  ev->add_option("--cutoff", ev_cutoff, "MAP cutoff");
  ev->add_option("--p-at-k", ev_pk, "Comma list of precision cutoffs");
  ev->add_option("--out", ev_out, "Write metrics JSON here as well as stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    write_json_error("usage", e.what());
    return 2;
  }

  try {
    if (*gen) {
      syn.dims = parse_list<hcfw::Index>(gen_dims, "dimension");
      syn.label_cardinality = hcfw::parse_cardinality(gen_card);
      return cmd_generate(gen_out, syn);
    }

    if (*split) {
      const auto ds = hcfw::io::load_dataset(split_dataset);
      const auto kind = hcfw::scenario_kind_from_string(split_kind);
      hcfw::ScenarioPlan plan;
      if (kind == hcfw::ScenarioKind::iid) {
        auto sizes = parse_list<hcfw::Index>(chunk_sizes, "chunk size");
        if (sizes.empty()) {
          if (split_rounds < 1) throw hcfw::InvalidArgument("rounds must be >= 1");
          const hcfw::Index each = (ds.size() - test_size) / split_rounds;
          sizes.assign(static_cast<std::size_t>(split_rounds), each);
        }
        plan = hcfw::split_iid(ds.labels, sizes, test_size, split_seed);
      } else {
        plan = hcfw::split_category_incremental(ds.labels, split_rounds,
                                                kind == hcfw::ScenarioKind::overlap, train_ratio,
                                                split_seed);
      }
      hcfw::save_plan(split_out, plan);
      json summary = {{"plan", split_out.string()}, {"kind", split_kind}, {"rounds", json::array()}};
      for (const auto& r : plan.rounds) {
        summary["rounds"].push_back(
            {{"train", r.train.size()}, {"test", r.test.size()}, {"categories", r.categories.size()}});
      }
      std::cout << summary.dump() << std::endl;
      return 0;
    }

    if (*train) {
      const auto ds = hcfw::io::load_dataset(train_dataset);
      const auto plan = hcfw::load_plan(train_plan);
      if (plan.rounds.empty()) throw hcfw::InvalidArgument("plan has no rounds");
      const auto config =
          train_flags.config(static_cast<hcfw::Index>(plan.rounds.front().train.size()));
      const auto config_json = hcfw::detail::config_to_json(config);

      std::ofstream report;
      if (!train_report.empty()) {
        report.open(train_report, std::ios::trunc);
        if (!report) throw hcfw::IoError("cannot write " + train_report.string());
      }
      auto emit = [&](const json& line) {
        std::cout << line.dump() << std::endl;
        if (report.is_open()) report << line.dump() << "\n" << std::flush;
      };
      emit({{"type", "run"},
            {"config", config_json},
            {"fingerprints",
             {{"dataset", fingerprint_directory(train_dataset)},
              {"plan", hcfw::io::sha256_hex(hcfw::io::read_file(train_plan))},
              {"config", hcfw::io::sha256_hex(std::string_view(config_json.dump()))},
              {"seed", hcfw::io::sha256_hex(std::string_view(std::to_string(config.seed)))}}},
            {"artifacts",
             {{"dataset", train_dataset.string()},
              {"plan", train_plan.string()},
              {"state", train_state.string()},
              {"report", train_report.string()}}}});

      hcfw::PipelineOptions opt;
      opt.precision_ks = parse_list<hcfw::Index>(p_at_k, "k");
      opt.state_dir = train_state;
      opt.on_round = [&](const hcfw::RoundRecord& rec, const hcfw::EngineState&) {
        auto line = rec.to_json();
        line["type"] = "round";
        emit(line);
      };
      hcfw::run_plan(ds, plan, config, opt);
      return 0;
    }

    if (*enc) {
      const auto state = hcfw::load_state(enc_state);
      auto queries = hcfw::io::load_modalities(enc_queries);
      hcfw::EngineState view = state;
      if (enc_no_fg) view.config.fine_grained = false;
      const auto codes = hcfw::encode(view, queries);
      hcfw::io::save_code_matrix(enc_out, codes);
      std::cout << json{{"codes", enc_out.string()}, {"n", codes.size()}, {"r", codes.bits()}}.dump()
                << std::endl;
      return 0;
    }

    if (*ev) {
      const auto q_codes = hcfw::io::load_code_matrix(ev_qcodes);
      auto q_labels = hcfw::io::load_label_matrix(ev_qlabels);
      hcfw::CodeMatrix db_codes;
      hcfw::LabelMatrix db_labels;
      if (!ev_state.empty()) {
        const auto state = hcfw::load_state(ev_state);
        db_codes = state.database_codes;
        db_labels = state.database_labels;
        ev_round = state.round;
        if (!ev_qcats.empty()) {
          hcfw::io::Dataset view;
          view.labels = q_labels;
          view.categories = hcfw::io::load_categories(ev_qcats);
          if (static_cast<hcfw::Index>(view.categories.size()) != q_labels.categories()) {
            throw hcfw::ValidationError("query categories do not match query label rows");
          }
          std::vector<hcfw::Index> all(static_cast<std::size_t>(q_labels.size()));
          for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<hcfw::Index>(i);
          q_labels = hcfw::labels_in_registry_order(view, all, state.high_level.registry);
        }
      } else {
        if (ev_dbcodes.empty() || ev_dblabels.empty()) {
          throw hcfw::InvalidArgument("evaluate needs --state or both --db-codes and --db-labels");
        }
        db_codes = hcfw::io::load_code_matrix(ev_dbcodes);
        db_labels = hcfw::io::load_label_matrix(ev_dblabels);
      }
      if (q_codes.size() != q_labels.size()) {
        throw hcfw::DimensionError("query codes and labels differ in column count");
      }
      if (db_codes.size() != db_labels.size()) {
        throw hcfw::DimensionError("database codes and labels differ in column count");
      }
      const auto start = std::chrono::steady_clock::now();
      auto rec = hcfw::evaluate_codes(q_codes, q_labels, db_codes, db_labels,
                                      parse_list<hcfw::Index>(ev_pk, "k"), ev_cutoff);
      rec.round = ev_round;
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      const auto out = rec.to_json();
      std::cout << out.dump() << std::endl;
      if (!ev_out.empty()) hcfw::io::write_text(ev_out, out.dump() + "\n");
      return 0;
    }
  } catch (const hcfw::Error& e) {
    write_json_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    write_json_error("internal", e.what());
    return 1;
  }
  return 0;
}
