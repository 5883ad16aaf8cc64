#include "partsel/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace partsel {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (!input && !synthetic) throw RangeError("experiment needs an input file or a synthetic spec");
  if (partitions == 0) throw RangeError("partition count must be positive");
  if (repetitions == 0) throw RangeError("repetitions must be at least 1");
  if (budgets.empty()) throw RangeError("no budgets given");
  for (double b : budgets) {
    if (!(b > 0.0 && b <= 1.0)) throw RangeError("budgets must be in (0, 1]");
  }
  for (const auto& s : strategies) {
    if (std::find(std::begin(kStrategies), std::end(kStrategies), s) == std::end(kStrategies)) {
      throw RangeError("unknown strategy '" + s + "'");
    }
  }
  if (!(selection_sample > 0.0 && selection_sample <= 1.0)) throw RangeError("selection_sample must be in (0, 1]");
  picker.validate();
}

json ExperimentConfig::to_json() const {
  json j{{"out", out.string()},
         {"layout", layout.to_string()},
         {"partitions", partitions},
         {"sketch", sketch.to_json()},
         {"train_queries", train_queries},
         {"test_queries", test_queries},
         {"budgets", budgets},
         {"strategies", strategies},
         {"picker", picker.to_json()},
         {"funnel",
          {{"k", funnel.k},
           {"label_c", funnel.label_c},
           {"min_queries", funnel.min_queries},
           {"min_positive_rows", funnel.min_positive_rows},
           {"gbt", funnel.gbt.to_json()}}},
         {"feature_selection", feature_selection},
         {"selection_restarts", selection_restarts},
         {"selection_sample", selection_sample},
         {"selection_budget", selection_budget},
         {"repetitions", repetitions},
         {"seed", seed}};
  if (input) {
    j["input"] = input->string();
    j["schema"] = schema.to_json();
  }
  if (synthetic) j["synthetic"] = synthetic->to_json();
  if (workload) j["workload"] = workload->to_json();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  ExperimentConfig c;
  try {
    c.out = doc.value("out", c.out.string());
    if (doc.contains("input")) {
      c.input = doc.at("input").get<std::string>();
      c.schema = Schema::from_json(doc.at("schema"));
    }
    if (doc.contains("synthetic")) c.synthetic = SyntheticSpec::from_json(doc.at("synthetic"));
    if (doc.contains("layout")) c.layout = LayoutSpec::parse(doc.at("layout").get<std::string>());
    c.partitions = doc.value("partitions", c.partitions);
    if (doc.contains("sketch")) c.sketch = SketchParams::from_json(doc.at("sketch"));
    if (doc.contains("workload")) c.workload = WorkloadSpec::from_json(doc.at("workload"));
    c.train_queries = doc.value("train_queries", c.train_queries);
    c.test_queries = doc.value("test_queries", c.test_queries);
    c.budgets = doc.value("budgets", c.budgets);
    c.strategies = doc.value("strategies", c.strategies);
    if (doc.contains("picker")) c.picker = PickerConfig::from_json(doc.at("picker"));
    if (doc.contains("funnel")) {
      const auto& f = doc.at("funnel");
      c.funnel.k = f.value("k", c.funnel.k);
      c.funnel.label_c = f.value("label_c", c.funnel.label_c);
      c.funnel.min_queries = f.value("min_queries", c.funnel.min_queries);
      c.funnel.min_positive_rows = f.value("min_positive_rows", c.funnel.min_positive_rows);
      if (f.contains("gbt")) c.funnel.gbt = GbtParams::from_json(f.at("gbt"));
    }
    c.picker.k = c.funnel.k;
    c.feature_selection = doc.value("feature_selection", c.feature_selection);
    c.selection_restarts = doc.value("selection_restarts", c.selection_restarts);
    c.selection_sample = doc.value("selection_sample", c.selection_sample);
    c.selection_budget = doc.value("selection_budget", c.selection_budget);
    c.repetitions = doc.value("repetitions", c.repetitions);
    c.seed = doc.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t budget_partitions(double fraction, std::size_t partition_count) {
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(partition_count) + 0.5));
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(1, partition_count));
}

WorkloadSpec default_workload_spec(const Schema& schema, const std::vector<SketchSet>& sketches,
                                   std::size_t group_limit) {
  WorkloadSpec spec;
  const auto distinct = global_distinct_estimates(sketches);
  std::string first_measure;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema[c];
    spec.predicate_columns.push_back(col.name);
    if (col.kind == ColumnKind::Numeric) {
      spec.aggregates.push_back(Aggregate::sum(col.name));
      if (first_measure.empty()) first_measure = col.name;
    } else if (col.kind == ColumnKind::Categorical && c < distinct.size() &&
               distinct[c] <= static_cast<double>(group_limit)) {
      spec.group_by_columns.push_back(col.name);
    }
  }
  spec.aggregates.push_back(Aggregate::count_star());
  if (!first_measure.empty()) spec.aggregates.push_back(Aggregate::avg(first_measure));
  spec.max_group_by = std::min<std::size_t>(2, spec.group_by_columns.size());
  return spec;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::pair<std::string, double>, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, fresh] = index.try_emplace({r.strategy, r.budget}, out.size());
    if (fresh) out.push_back({r.strategy, r.budget, r.partitions, 0, 0.0, 0.0, 0.0});
    auto& s = out[it->second];
    ++s.runs;
    s.missed_groups += r.error.missed_groups;
    s.avg_relative_error += r.error.avg_relative_error;
    s.abs_over_true += r.error.abs_over_true;
  }
  for (auto& s : out) {
    const auto n = static_cast<double>(s.runs);
    s.missed_groups /= n;
    s.avg_relative_error /= n;
    s.abs_over_true /= n;
  }
  return out;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_results_csv(const std::vector<ResultRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << "query,strategy,budget,partitions,run,missed_groups,avg_relative_error,abs_over_true\n";
  for (const auto& r : rows) {
    out << r.query << ',' << r.strategy << ',' << format_number(r.budget) << ',' << r.partitions << ',' << r.run
        << ',' << format_number(r.error.missed_groups) << ',' << format_number(r.error.avg_relative_error) << ','
        << format_number(r.error.abs_over_true) << '\n';
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << "strategy,budget,partitions,runs,missed_groups,avg_relative_error,abs_over_true\n";
  for (const auto& s : rows) {
    out << s.strategy << ',' << format_number(s.budget) << ',' << s.partitions << ',' << s.runs << ','
        << format_number(s.missed_groups) << ',' << format_number(s.avg_relative_error) << ','
        << format_number(s.abs_over_true) << '\n';
  }
}

LssModel train_lss(const std::vector<TrainingQuery>& train, const std::vector<LssTrainingQuery>& scoring,
                   const std::vector<std::size_t>& budgets, std::size_t upper_column, const GbtParams& params,
                   std::uint64_t seed) {
  LssModel lss;
  if (train.empty()) return lss;
  FeatureMatrix stacked;
  stacked.cols = train.front().features.cols;
  std::vector<double> labels;
  for (const auto& q : train) {
    stacked.values.insert(stacked.values.end(), q.features.values.begin(), q.features.values.end());
    stacked.rows += q.features.rows;
    labels.insert(labels.end(), q.contributions.begin(), q.contributions.end());
  }
  lss.model = train_gbt(stacked, labels, params);
  stacked = {};

  struct Prepared {
    std::vector<std::size_t> eligible;
    std::vector<double> predictions;
  };
  std::vector<Prepared> prepared(scoring.size());
  for (std::size_t q = 0; q < scoring.size(); ++q) {
    prepared[q].eligible = filter_eligible(*scoring[q].features, upper_column);
    for (auto p : prepared[q].eligible) prepared[q].predictions.push_back(lss.model.predict(scoring[q].features->row(p)));
  }
  const std::size_t partitions = train.front().features.rows;
  const std::size_t max_strata = std::max<std::size_t>(2, std::min<std::size_t>(200, partitions / 2));
  for (auto budget : budgets) {
    std::size_t best = 2;
    double best_err = -1.0;
    for (std::size_t strata = 2; strata <= max_strata; ++strata) {
      double total = 0.0;
      for (std::size_t q = 0; q < scoring.size(); ++q) {
        Rng rng = make_rng(seed, "lss-sweep", q);
        const auto sel = stratified_select(prepared[q].eligible, prepared[q].predictions, strata, budget, rng);
        total += error_metrics(merge_answers(sel, *scoring[q].partials), *scoring[q].truth).avg_relative_error;
      }
      if (best_err < 0.0 || total < best_err) {
        best_err = total;
        best = strata;
      }
    }
    lss.strata[budget] = best;
  }
  return lss;
}

namespace {

template <class F>
auto stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw Error(std::string("stage '") + name + "' failed: " + e.what());
  }
}

struct QuerySet {
  std::vector<Query> queries;
  std::vector<std::vector<GroupedAnswer>> partials;
  std::vector<GroupedAnswer> truth;
};

void write_json(const json& doc, const fs::path& path) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  fs::create_directories(config.out);
  ExperimentResult result;
  json timings = json::object();
  auto mark = [&](const char* name, clock::time_point since) {
    timings[name] = std::chrono::duration<double>(clock::now() - since).count();
  };

  auto t0 = clock::now();
  RowBlock rows = stage("data", [&] {
    if (config.synthetic) return make_synthetic(*config.synthetic);
    CsvReadReport report;
    RowBlock b = read_table(*config.input, config.schema, &report);
    for (const auto& w : report.warnings) result.warnings.push_back(w);
    return b;
  });
  const Schema schema = rows.schema();
  mark("data", t0);

  t0 = clock::now();
  const PartitionedDataset dataset = stage("ingest", [&] {
    return ingest_block(rows, config.layout, config.partitions, config.out / "dataset",
                        derive_seed(config.seed, "hash"));
  });
  rows = RowBlock();
  const auto blocks = stage("ingest", [&] { return load_all_partitions(dataset); });
  const std::size_t N = blocks.size();
  mark("ingest", t0);

  t0 = clock::now();
  const FeatureContext ctx = stage("sketch", [&] {
    SketchParams params = config.sketch;
    params.hash_seed = dataset.hash_seed;
    return FeatureContext(schema, sketch_dataset(dataset, params));
  });
  mark("sketch", t0);

  t0 = clock::now();
  WorkloadSpec spec;
  QuerySet train, test;
  stage("workload", [&] {
    if (config.workload) {
      spec = *config.workload;
    } else {
      spec = default_workload_spec(schema, ctx.sketches);
      spec.seed = derive_seed(config.seed, "workload");
    }
    const auto domains = column_domains(schema, ctx.sketches, ctx.global);
    ScopeOptions scope;
    scope.distinct_estimates = global_distinct_estimates(ctx.sketches);
    std::set<std::string> seen;
    std::uint64_t stream = 0;
    auto fill = [&](QuerySet& set, std::size_t count) {
      for (std::size_t round = 0; set.queries.size() < count; ++round) {
        if (round >= 50) throw RangeError("could not draw enough queries with nonempty answers");
        for (auto& q : generate_workload(spec, domains, count - set.queries.size(), seen, stream++)) {
          try {
            check_scope(q, schema, scope);
          } catch (const ScopeError&) {
            continue;
          }
          std::vector<GroupedAnswer> partials(N);
          parallel_for(N, [&](std::size_t p) { partials[p] = evaluate_exact(q, blocks[p]); });
          GroupedAnswer truth = exact_answer(partials);
          if (truth.empty()) continue;
          set.queries.push_back(std::move(q));
          set.partials.push_back(std::move(partials));
          set.truth.push_back(std::move(truth));
        }
      }
    };
    fill(train, config.train_queries);
    fill(test, config.test_queries);
    write_workload(train.queries, config.out / "train.sql");
    write_workload(test.queries, config.out / "test.sql");
    return 0;
  });
  mark("workload", t0);

  t0 = clock::now();
  Normalizer normalizer;
  FunnelModels funnel;
  LssModel lss;
  PickerConfig picker = config.picker;
  picker.k = config.funnel.k;
  std::vector<std::size_t> budget_counts;
  for (double b : config.budgets) budget_counts.push_back(budget_partitions(b, N));
  json selection_doc = json::object();
  stage("train", [&] {
    std::vector<TrainingQuery> training(train.queries.size());
    {
      std::vector<FeatureMatrix> raw(train.queries.size());
      parallel_for(raw.size(), [&](std::size_t i) { raw[i] = ctx.featurize(train.queries[i]); });
      std::vector<const FeatureMatrix*> ptrs;
      for (const auto& m : raw) ptrs.push_back(&m);
      normalizer = train.queries.empty() ? Normalizer::fit(ctx.layout, {}) : Normalizer::fit(ctx.layout, ptrs);
      for (std::size_t i = 0; i < raw.size(); ++i) {
        training[i].features = normalizer.apply(raw[i]);
        training[i].contributions = contribution(train.partials[i], train.truth[i]);
      }
    }
    FunnelParams fp = config.funnel;
    if (training.size() < fp.min_queries) {
      result.warnings.push_back("funnel skipped: " + std::to_string(training.size()) + " training queries");
    } else {
      funnel = train_funnel(training, fp);
    }
    for (const auto& w : funnel.warnings) result.warnings.push_back(w);

    std::vector<LssTrainingQuery> scoring;
    for (std::size_t i = 0; i < training.size(); ++i) {
      scoring.push_back({&training[i].features, &train.partials[i], &train.truth[i]});
    }
    lss = train_lss(training, scoring, budget_counts, ctx.layout.selectivity_offset(), fp.gbt,
                    derive_seed(config.seed, "lss"));

    if (config.feature_selection && !training.empty()) {
      Rng rng = make_rng(config.seed, "selection-sample");
      const auto take = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(config.selection_sample * static_cast<double>(training.size()))));
      std::vector<ScoringQuery> sample;
      for (auto i : sample_without_replacement(training.size(), std::min(take, training.size()), rng)) {
        sample.push_back({training[i].features, &train.partials[i], train.truth[i]});
      }
      const std::size_t budget = budget_partitions(config.selection_budget, N);
      const auto score = [&](const ExclusionMask& mask) {
        return clustering_score(sample, ctx.layout, mask, budget, picker);
      };
      const auto sel =
          select_features(score, kFeatureKindCount, config.selection_restarts, derive_seed(config.seed, "selection"));
      picker.excluded = excluded_kinds(sel.excluded);
      selection_doc = {{"score", sel.score}, {"evaluations", sel.evaluations}};
    }
    result.excluded = picker.excluded;

    fs::create_directories(dataset.model_dir());
    write_json(funnel.to_json(), dataset.model_dir() / "funnel.json");
    write_json(normalizer.to_json(), dataset.model_dir() / "normalizer.json");
    write_json(lss.to_json(), dataset.model_dir() / "lss.json");
    write_json(picker.to_json(), dataset.model_dir() / "picker.json");
    return 0;
  });
  mark("train", t0);

  t0 = clock::now();
  std::vector<std::vector<ResultRow>> per_query(test.queries.size());
  auto flush = [&] {
    result.rows.clear();
    for (const auto& q : per_query) result.rows.insert(result.rows.end(), q.begin(), q.end());
    result.summary = summarize(result.rows);
    write_results_csv(result.rows, config.out / "results.csv");
    write_summary_csv(result.summary, config.out / "summary.csv");
  };
  try {
    parallel_for(test.queries.size(), [&](std::size_t qi) {
      const Query& q = test.queries[qi];
      const FeatureMatrix features = normalizer.apply(ctx.featurize(q));
      const PickInput input = make_pick_input(ctx, q, features);
      const auto eligible = filter_eligible(features, ctx.layout.selectivity_offset());
      std::vector<double> predictions;
      for (auto p : eligible) predictions.push_back(lss.model.predict(features.row(p)));
      const auto& partials = test.partials[qi];
      const auto& truth = test.truth[qi];
      std::vector<ResultRow> out;
      for (std::size_t bi = 0; bi < config.budgets.size(); ++bi) {
        const std::size_t n = budget_counts[bi];
        for (const auto& strategy : config.strategies) {
          const bool deterministic = strategy == "ps3" && picker.exemplar == ExemplarMode::MedianClosest;
          const std::size_t reps = deterministic ? 1 : config.repetitions;
          for (std::size_t rep = 0; rep < reps; ++rep) {
            Rng rng = make_rng(config.seed, "rep:" + strategy, (qi * 1000 + bi) * 1000 + rep);
            Selection sel;
            if (strategy == "uniform") {
              sel = uniform_select(N, n, rng);
            } else if (strategy == "uniform+filter") {
              sel = uniform_select(eligible, n, rng);
            } else if (strategy == "lss") {
              sel = eligible.empty() ? Selection{}
                                     : stratified_select(eligible, predictions, lss.strata_for(n), n, rng);
            } else {
              sel = pick(input, n, funnel, picker, rep).selection;
            }
            out.push_back({qi, strategy, config.budgets[bi], n, rep,
                           error_metrics(merge_answers(sel, partials), truth)});
          }
        }
      }
      per_query[qi] = std::move(out);
    });
  } catch (const std::exception& e) {
    flush();
    throw Error(std::string("stage 'evaluate' failed: ") + e.what());
  }
  flush();
  mark("evaluate", t0);
  mark("total", started);

  json manifest{{"config", config.to_json()},
                {"seeds",
                 {{"root", config.seed},
                  {"hash", dataset.hash_seed},
                  {"workload", spec.seed},
                  {"lss", derive_seed(config.seed, "lss")},
                  {"selection", derive_seed(config.seed, "selection")}}},
                {"partitions", N},
                {"rows", dataset.total_rows},
                {"train_queries", train.queries.size()},
                {"test_queries", test.queries.size()},
                {"workload_spec", spec.to_json()},
                {"funnel_models", funnel.size()},
                {"excluded_features", picker.to_json().at("excluded")},
                {"feature_selection", selection_doc},
                {"lss_strata", lss.to_json().at("strata")},
                {"warnings", result.warnings},
                {"seconds", timings}};
  write_json(manifest, config.out / "run.json");
  return result;
}

}  // namespace partsel
