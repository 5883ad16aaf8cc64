#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "partsel/experiment.hpp"

using namespace partsel;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

// "12" is a partition count, "5%" a share of all partitions.
std::size_t parse_budget(const std::string& text, std::size_t partitions) {
  if (!text.empty() && text.back() == '%') {
    const auto v = parse_number(std::string_view(text).substr(0, text.size() - 1));
    if (!v || *v <= 0.0 || *v > 100.0) throw RangeError("bad budget '" + text + "'");
    return budget_partitions(*v / 100.0, partitions);
  }
  const auto v = parse_number(text);
  if (!v || *v < 1.0 || *v != std::floor(*v)) throw RangeError("bad budget '" + text + "'");
  return std::min(static_cast<std::size_t>(*v), partitions);
}

struct Loaded {
  PartitionedDataset dataset;
  FeatureContext context;
};

Loaded load(const fs::path& dir) {
  Loaded l{PartitionedDataset::open(dir), {}};
  l.context = FeatureContext(l.dataset.schema, load_dataset_sketches(l.dataset));
  return l;
}

Query load_query(const std::string& text, const Loaded& l) {
  Query q = parse_query(text);
  ScopeOptions scope;
  scope.distinct_estimates = global_distinct_estimates(l.context.sketches);
  check_scope(q, l.dataset.schema, scope);
  return q;
}

std::vector<GroupedAnswer> partials_of(const Query& q, const std::vector<RowBlock>& blocks) {
  std::vector<GroupedAnswer> out(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t p) { out[p] = evaluate_exact(q, blocks[p]); });
  return out;
}

struct Models {
  Normalizer normalizer;
  FunnelModels funnel;
  PickerConfig picker;
};

Models load_models(const PartitionedDataset& ds) {
  const fs::path dir = ds.model_dir();
  if (!fs::exists(dir / "normalizer.json")) throw Error("no trained model under " + dir.string() + "; run train first");
  Models m;
  m.normalizer = Normalizer::from_json(read_json(dir / "normalizer.json"));
  m.funnel = FunnelModels::from_json(read_json(dir / "funnel.json"));
  if (fs::exists(dir / "picker.json")) m.picker = PickerConfig::from_json(read_json(dir / "picker.json"));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partition selection with summary statistics"};
  app.require_subcommand(1);

  std::string input, schema_path, layout = "ingest", out, dataset, spec_path, workload_path, query, budget = "10%";
  std::size_t partitions = 100, count = 100, k = 4, restarts = 10, run = 0;
  std::uint64_t seed = 1;
  SketchParams sketch_params;
  bool explain = false, exact = false, select = false;

  auto* ingest_cmd = app.add_subcommand("ingest", "Split a delimited file into partitions");
  ingest_cmd->add_option("--input", input)->required();
  ingest_cmd->add_option("--schema", schema_path, "JSON schema file")->required();
  ingest_cmd->add_option("--layout", layout, "ingest | sorted:<col> | random:<seed>");
  ingest_cmd->add_option("--partitions", partitions);
  ingest_cmd->add_option("--out", out)->required();

  auto* sketch_cmd = app.add_subcommand("sketch", "Build per-partition statistics");
  sketch_cmd->add_option("--dataset", dataset)->required();
  sketch_cmd->add_option("--buckets", sketch_params.buckets);
  sketch_cmd->add_option("--akmv-k", sketch_params.akmv_k);
  sketch_cmd->add_option("--hh-support", sketch_params.hh_support);

  auto* workload_cmd = app.add_subcommand("workload", "Generate a random query workload");
  workload_cmd->add_option("--dataset", dataset)->required();
  workload_cmd->add_option("--spec", spec_path, "JSON workload spec; derived from the schema when omitted");
  workload_cmd->add_option("--count", count);
  workload_cmd->add_option("--seed", seed);
  workload_cmd->add_option("--out", out)->required();

  auto* train_cmd = app.add_subcommand("train", "Train the importance funnel");
  train_cmd->add_option("--dataset", dataset)->required();
  train_cmd->add_option("--workload", workload_path)->required();
  train_cmd->add_option("--k", k);
  train_cmd->add_flag("--select-features", select, "Run feature selection for clustering");
  train_cmd->add_option("--restarts", restarts);

  auto* pick_cmd = app.add_subcommand("pick", "Choose weighted partitions for a query");
  pick_cmd->add_option("--dataset", dataset)->required();
  pick_cmd->add_option("--query", query)->required();
  pick_cmd->add_option("--budget", budget, "partition count or percentage");
  pick_cmd->add_option("--run", run, "random stream index");
  pick_cmd->add_flag("--explain", explain);

  auto* answer_cmd = app.add_subcommand("answer", "Approximate (or exact) query answer");
  answer_cmd->add_option("--dataset", dataset)->required();
  answer_cmd->add_option("--query", query)->required();
  answer_cmd->add_option("--budget", budget);
  answer_cmd->add_flag("--exact", exact);

  auto* features_cmd = app.add_subcommand("features", "Print the per-partition feature matrix of a query");
  features_cmd->add_option("--dataset", dataset)->required();
  features_cmd->add_option("--query", query)->required();

  auto* run_cmd = app.add_subcommand("run", "Run a full experiment from a JSON config");
  std::string config_path;
  run_cmd->add_option("--config", config_path)->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic table and its schema");
  SyntheticSpec synth;
  synth_cmd->add_option("--spec", spec_path, "JSON synthetic spec");
  synth_cmd->add_option("--rows", synth.rows);
  synth_cmd->add_option("--skew", synth.skew);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--out", out, "CSV path; the schema goes next to it")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      const Schema schema = Schema::from_json(read_json(schema_path));
      const auto ds = ingest(input, schema, LayoutSpec::parse(layout), partitions, out);
      std::cout << "partitions " << ds.partition_count() << ", rows " << ds.total_rows << ", rejected "
                << ds.rejected_rows << '\n';
    } else if (*sketch_cmd) {
      const auto ds = PartitionedDataset::open(dataset);
      sketch_params.hash_seed = ds.hash_seed;
      const auto sets = sketch_dataset(ds, sketch_params);
      std::cout << "sketched " << sets.size() << " partitions\n";
    } else if (*workload_cmd) {
      const Loaded l = load(dataset);
      WorkloadSpec spec = spec_path.empty() ? default_workload_spec(l.dataset.schema, l.context.sketches)
                                            : WorkloadSpec::from_json(read_json(spec_path));
      if (workload_cmd->count("--seed")) spec.seed = seed;
      std::set<std::string> seen;
      const auto queries =
          generate_workload(spec, column_domains(l.dataset.schema, l.context.sketches, l.context.global), count, seen);
      write_workload(queries, out);
      std::cout << "wrote " << queries.size() << " queries\n";
    } else if (*train_cmd) {
      const Loaded l = load(dataset);
      const auto blocks = load_all_partitions(l.dataset);
      const auto queries = read_workload(workload_path);
      std::vector<FeatureMatrix> raw;
      std::vector<std::vector<GroupedAnswer>> partials;
      std::vector<GroupedAnswer> truth;
      for (const auto& q : queries) {
        auto p = partials_of(q, blocks);
        auto t = exact_answer(p);
        if (t.empty()) continue;
        raw.push_back(l.context.featurize(q));
        partials.push_back(std::move(p));
        truth.push_back(std::move(t));
      }
      std::vector<const FeatureMatrix*> ptrs;
      for (const auto& m : raw) ptrs.push_back(&m);
      const Normalizer normalizer = Normalizer::fit(l.context.layout, ptrs);
      std::vector<TrainingQuery> train(raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        train[i].features = normalizer.apply(raw[i]);
        train[i].contributions = contribution(partials[i], truth[i]);
      }
      FunnelParams fp;
      fp.k = k;
      const FunnelModels funnel = train_funnel(train, fp);
      for (const auto& w : funnel.warnings) std::cerr << "warning: " << w << '\n';
      PickerConfig picker;
      picker.k = k;
      if (select) {
        std::vector<ScoringQuery> sample;
        Rng rng = make_rng(seed, "selection-sample");
        const auto take = std::max<std::size_t>(1, (train.size() + 4) / 5);
        for (auto i : sample_without_replacement(train.size(), std::min(take, train.size()), rng)) {
          sample.push_back({train[i].features, &partials[i], truth[i]});
        }
        const std::size_t n = budget_partitions(0.1, l.dataset.partition_count());
        const auto sel = select_features(
            [&](const ExclusionMask& m) { return clustering_score(sample, l.context.layout, m, n, picker); },
            kFeatureKindCount, restarts, derive_seed(seed, "selection"));
        picker.excluded = excluded_kinds(sel.excluded);
      }
      fs::create_directories(l.dataset.model_dir());
      write_json(funnel.to_json(), l.dataset.model_dir() / "funnel.json");
      write_json(normalizer.to_json(), l.dataset.model_dir() / "normalizer.json");
      write_json(picker.to_json(), l.dataset.model_dir() / "picker.json");
      std::cout << "trained " << funnel.size() << " models on " << train.size() << " queries\n";
      const auto importance = feature_importance(funnel, l.context.layout);
      for (const auto& [cat, share] : importance.shares) {
        std::cout << "gain " << to_string(cat) << ' ' << format_number(share) << "%\n";
      }
      for (auto kind : picker.excluded) std::cout << "excluded " << to_string(kind) << '\n';
    } else if (*pick_cmd || *answer_cmd) {
      const Loaded l = load(dataset);
      const Query q = load_query(query, l);
      const std::size_t n = parse_budget(budget, l.dataset.partition_count());
      std::vector<std::string> group_columns = q.group_by;
      if (*answer_cmd && exact) {
        const auto blocks = load_all_partitions(l.dataset);
        exact_answer(partials_of(q, blocks)).write_csv(std::cout, group_columns);
        return 0;
      }
      const Models m = load_models(l.dataset);
      const FeatureMatrix features = m.normalizer.apply(l.context.featurize(q));
      const PickResult r = pick(make_pick_input(l.context, q, features), n, m.funnel, m.picker, run);
      if (*pick_cmd) {
        if (explain) {
          for (const auto& line : r.explain) std::cerr << "# " << line << '\n';
        }
        std::cout << "partition_id,weight,source\n";
        for (std::size_t i = 0; i < r.selection.size(); ++i) {
          std::cout << r.selection[i].partition + 1 << ',' << format_number(r.selection[i].weight) << ','
                    << r.sources[i] << '\n';
        }
      } else {
        std::vector<GroupedAnswer> partials(l.dataset.partition_count());
        for (const auto& w : r.selection) partials[w.partition] = evaluate_exact(q, load_partition(l.dataset, w.partition));
        merge_answers(r.selection, partials).write_csv(std::cout, group_columns);
      }
    } else if (*features_cmd) {
      const Loaded l = load(dataset);
      const Query q = load_query(query, l);
      const FeatureMatrix f = l.context.featurize(q);
      std::cout << "partition_id";
      for (const auto& s : l.context.layout.slots()) std::cout << ',' << s.name;
      std::cout << '\n';
      for (std::size_t p = 0; p < f.rows; ++p) {
        std::cout << p + 1;
        for (std::size_t c = 0; c < f.cols; ++c) std::cout << ',' << format_number(f.at(p, c));
        std::cout << '\n';
      }
    } else if (*run_cmd) {
      const auto config = ExperimentConfig::from_json(read_json(config_path));
      const auto result = run_experiment(config);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "strategy,budget,partitions,runs,avg_relative_error\n";
      for (const auto& s : result.summary) {
        std::cout << s.strategy << ',' << format_number(s.budget) << ',' << s.partitions << ',' << s.runs << ','
                  << format_number(s.avg_relative_error) << '\n';
      }
    } else if (*synth_cmd) {
      if (!spec_path.empty()) synth = SyntheticSpec::from_json(read_json(spec_path));
      const RowBlock block = make_synthetic(synth);
      write_table(block, out);
      fs::path schema_out = fs::path(out).replace_extension(".schema.json");
      write_json(block.schema().to_json(), schema_out);
      std::cout << "wrote " << block.row_count() << " rows to " << out << " and schema to " << schema_out.string()
                << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
