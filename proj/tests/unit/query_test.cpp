#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "partsel/answer.hpp"
#include "partsel/workload.hpp"

using namespace partsel;
using partsel::testing::pairs;
using partsel::testing::scratch_dir;
using partsel::testing::xyz_rows;
using partsel::testing::xyz_schema;

TEST(Parse, SumWithGroupBy) {
  Query q = parse_query("SELECT SUM(X), Y FROM t WHERE Z > 1 GROUP BY Y");
  ASSERT_EQ(q.aggregates.size(), 1u);
  EXPECT_EQ(q.aggregates[0], Aggregate::sum("X"));
  EXPECT_EQ(q.predicate.clause_count(), 1u);
  EXPECT_EQ(q.predicate.clause.op, CompareOp::Gt);
  EXPECT_EQ(q.group_by, std::vector<std::string>{"Y"});
}

TEST(Parse, CountStarOnly) {
  Query q = parse_query("SELECT COUNT(*) FROM t");
  EXPECT_EQ(q.aggregates[0].kind, Aggregate::Kind::CountStar);
  EXPECT_TRUE(q.predicate.is_true());
  EXPECT_TRUE(q.group_by.empty());
}

TEST(Parse, UnsupportedConstructs) {
  EXPECT_THROW(parse_query("SELECT MAX(X) FROM t"), ScopeError);
  EXPECT_THROW(parse_query("SELECT SUM(x) FROM t, u"), ScopeError);
  EXPECT_THROW(parse_query("SELECT SUM(x) FROM t WHERE x IN (SELECT y FROM u)"), ScopeError);
  EXPECT_THROW(parse_query("SELECT SUM(x * y) FROM t"), ScopeError);
  EXPECT_THROW(parse_query("SELECT SUM(x), g FROM t"), ScopeError);
  EXPECT_THROW(parse_query("SELECT SUM(x) FROM t WHERE x > y"), ScopeError);
  EXPECT_THROW(parse_query("SELECT SUM(x FROM t"), ParseError);
  EXPECT_THROW(parse_query("SELECT SUM(x) FROM t WHERE g = 'open"), ParseError);
}

TEST(Parse, ConnectivesAndSugar) {
  Query q = parse_query(
      "select sum(a - b), avg(c) from t where (a between 1 and 5 or g in ('x', 'y')) and not (h like 'p%') "
      "group by g");
  EXPECT_EQ(q.aggregates[0].terms.size(), 2u);
  EXPECT_TRUE(q.aggregates[0].terms[1].negative);
  EXPECT_EQ(q.predicate.kind, Predicate::Kind::And);
  EXPECT_EQ(q.predicate.clause_count(), 4u);
}

TEST(Parse, PrintParseRoundTrip) {
  for (const char* text : {"SELECT SUM(x), COUNT(*), g FROM t WHERE x >= 3 AND NOT (g = 'a') GROUP BY g",
                           "SELECT AVG(x) FROM t WHERE d < '2020-01-01' OR x IN (1, 2.5, -3)",
                           "SELECT SUM(x - y) FROM t WHERE g LIKE 'a_%' AND g != 'b'"}) {
    Query q = parse_query(text);
    EXPECT_EQ(parse_query(q.to_sql()), q) << text;
  }
}

TEST(Scope, SchemaChecks) {
  const Schema s = xyz_schema();
  EXPECT_NO_THROW(check_scope(parse_query("SELECT SUM(x), g FROM t WHERE d > '2019-05-01' GROUP BY g"), s));
  EXPECT_THROW(check_scope(parse_query("SELECT SUM(nope) FROM t"), s), SchemaError);
  EXPECT_THROW(check_scope(parse_query("SELECT SUM(g) FROM t"), s), ScopeError);
  EXPECT_THROW(check_scope(parse_query("SELECT SUM(x) FROM t WHERE g < 'a'"), s), ScopeError);
  EXPECT_THROW(check_scope(parse_query("SELECT SUM(x) FROM t WHERE x LIKE 'a'"), s), ScopeError);
  EXPECT_THROW(check_scope(parse_query("SELECT SUM(x) FROM t WHERE d > 'yesterday'"), s), ScopeError);
  ScopeOptions opts;
  opts.distinct_estimates = {100, 100, 5000};
  EXPECT_THROW(check_scope(parse_query("SELECT SUM(x), g FROM t GROUP BY g"), s, opts), ScopeError);
}

TEST(Like, Wildcards) {
  EXPECT_TRUE(like_match("abc", "a%"));
  EXPECT_TRUE(like_match("abc", "%c"));
  EXPECT_TRUE(like_match("abc", "a_c"));
  EXPECT_TRUE(like_match("", "%"));
  EXPECT_FALSE(like_match("abc", "a_"));
  EXPECT_TRUE(like_match("aXbXc", "%X%c"));
  EXPECT_FALSE(like_match("ab", "%c%"));
}

TEST(Evaluate, GroupedSum) {
  RowBlock rows = pairs({{1, "a"}, {2, "a"}, {5, "b"}});
  auto ans = evaluate_exact(parse_query("SELECT SUM(x), g FROM t GROUP BY g"), rows);
  auto f = ans.finalize();
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f.at({"a"})[0], 3.0);
  EXPECT_EQ(f.at({"b"})[0], 5.0);
}

TEST(Evaluate, NoMatchIsEmpty) {
  RowBlock rows = pairs({{1, "a"}, {2, "a"}});
  EXPECT_TRUE(evaluate_exact(parse_query("SELECT COUNT(*) FROM t WHERE x > 10"), rows).empty());
}

TEST(Evaluate, MaskMatchesRowByRowOracle) {
  RowBlock rows = xyz_rows(200, 6);
  Query q = parse_query("SELECT COUNT(*) FROM t WHERE (x < 50 OR g IN ('b', 'c')) AND NOT (d >= '2019-04-10')");
  auto mask = predicate_mask(q.predicate, rows);
  const double cut = static_cast<double>(*parse_iso_date("2019-04-10"));
  for (std::size_t r = 0; r < rows.row_count(); ++r) {
    const bool expect = (rows.number(0, r) < 50 || rows.text(2, r) == "b" || rows.text(2, r) == "c") &&
                        !(rows.number(1, r) >= cut);
    EXPECT_EQ(static_cast<bool>(mask[r]), expect) << r;
  }
}

TEST(Evaluate, PartitionAnswersAddUp) {
  RowBlock rows = xyz_rows(99, 4);
  Query q = parse_query("SELECT SUM(x), COUNT(*), AVG(x), g FROM t WHERE x > 7 GROUP BY g");
  std::vector<GroupedAnswer> partials;
  for (std::size_t p = 0; p < 3; ++p) partials.push_back(evaluate_exact(q, rows.slice(p * 33, 33)));
  auto whole = evaluate_exact(q, rows).finalize();
  auto merged = exact_answer(partials).finalize();
  ASSERT_EQ(whole.size(), merged.size());
  for (const auto& [k, v] : whole) {
    EXPECT_EQ(merged.at(k)[0], v[0]);
    EXPECT_EQ(merged.at(k)[1], v[1]);
    EXPECT_NEAR(merged.at(k)[2], v[2], 1e-12 * std::abs(v[2]));
  }
}

TEST(Merge, WeightsAndDuplication) {
  RowBlock a = pairs({{1, "g"}, {2, "h"}});
  RowBlock b = pairs({{10, "g"}});
  Query q = parse_query("SELECT SUM(x), g FROM t GROUP BY g");
  std::vector<GroupedAnswer> partials{evaluate_exact(q, a), evaluate_exact(q, b)};
  auto m = merge_answers({{0, 1.0}, {1, 3.0}}, partials).finalize();
  EXPECT_EQ(m.at({"g"})[0], 31.0);
  EXPECT_EQ(m.at({"h"})[0], 2.0);
  EXPECT_EQ(merge_answers({{0, 1.0}}, partials), partials[0]);

  std::vector<GroupedAnswer> twins{partials[0], partials[0]};
  EXPECT_EQ(merge_answers({{1, 2.0}}, twins), exact_answer(twins));
  EXPECT_THROW(merge_answers({{5, 1.0}}, partials), Error);
}

TEST(Workload, DeterministicDistinctAndInScope) {
  auto dir = scratch_dir("workload");
  RowBlock rows = xyz_rows(400, 6);
  std::vector<SketchSet> sk;
  for (std::size_t p = 0; p < 4; ++p) sk.push_back(build_sketchset(rows.slice(p * 100, 100), p));
  auto domains = column_domains(rows.schema(), sk, build_global_hh(sk));
  WorkloadSpec spec;
  spec.group_by_columns = {"g"};
  spec.aggregates = {Aggregate::sum("x"), Aggregate::count_star(), Aggregate::avg("x")};
  spec.predicate_columns = {"x", "d", "g"};
  spec.seed = 3;
  std::set<std::string> seen1, seen2;
  auto a = generate_workload(spec, domains, 500, seen1);
  auto b = generate_workload(spec, domains, 500, seen2);
  ASSERT_EQ(a.size(), 500u);
  EXPECT_EQ(a, b);
  std::set<std::string> texts;
  for (const auto& q : a) {
    texts.insert(q.to_sql());
    EXPECT_NO_THROW(check_scope(parse_query(q.to_sql()), rows.schema()));
  }
  EXPECT_EQ(texts.size(), 500u);

  write_workload(a, dir / "w.sql");
  EXPECT_EQ(read_workload(dir / "w.sql"), a);
}
