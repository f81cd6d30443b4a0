#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "binagree/data.hpp"
#include "binagree/errors.hpp"
#include "support.hpp"

using namespace binagree;
using testsupport::row;

namespace {

const char* const kHeader = "id,time,y1,y2,rater1,rater2\n";

std::string message_of(const std::string& text) {
  try {
    parse_wide_csv(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("parse_wide_csv reads the pseudodata layout") {
  const auto recs = parse_wide_csv(std::string(kHeader) + "1, 1, Negative, Negative, A, B\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0] == row("1", 1.0, 0, 0, "A", "B"));
}

TEST_CASE("parse_wide_csv honours custom columns and labels") {
  CsvColumns cols;
  cols.id = "patient";
  cols.time = "visit";
  cols.outcome_m1 = "cam";
  cols.outcome_m2 = "cam3d";
  cols.rater_m1 = "r1";
  cols.rater_m2 = "r2";
  OutcomeLabels labels{"yes", "no"};
  const auto recs = parse_wide_csv("r2,visit,extra,patient,cam,cam3d,r1\nB,2.5,x,p7,yes,no,A\n",
                                   labels, cols);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0] == row("p7", 2.5, 1, 0, "A", "B"));
}

TEST_CASE("parse_wide_csv errors") {
  CHECK(message_of(kHeader).find("empty dataset") != std::string::npos);

  const std::string typo = message_of(std::string(kHeader) + "1,1,Negative,Negative,A,B\n"
                                                             "1,2,Postive,Negative,A,B\n");
  CHECK(typo.find("Postive") != std::string::npos);
  CHECK(typo.find("line 3") != std::string::npos);

  CHECK(message_of(std::string(kHeader) + "1,1,Negative,Negative,A,B\n1,1,Positive,Negative,A,B\n")
            .find("duplicate") != std::string::npos);
  CHECK(message_of("id,time,y1,y2,rater1\n1,1,Negative,Negative,A\n").find("rater2") !=
        std::string::npos);
  CHECK(message_of(std::string(kHeader) + "1,1,Negative,Negative,A\n").find("line 2") !=
        std::string::npos);
  CHECK(message_of(std::string(kHeader) + "1,t1,Negative,Negative,A,B\n").find("invalid time") !=
        std::string::npos);
  // Labels are case-sensitive.
  CHECK(message_of(std::string(kHeader) + "1,1,positive,Negative,A,B\n").find("positive") !=
        std::string::npos);
}

TEST_CASE("widen_to_long doubles the record count and sorts by subject, method, time") {
  std::vector<PairedRecord> paired;
  for (int i = 0; i < 21; ++i)
    for (int t : {2, 1})
      paired.push_back(row("s" + std::to_string(i % 7) + "_" + std::to_string(i), t, i % 2,
                           (i / 2) % 2, "R" + std::to_string(i % 4), "R" + std::to_string(i % 5)));
  const LongDataset ds = widen_to_long(paired);
  CHECK(ds.records.size() == 84);
  CHECK(ds.n_subjects() == 21);
  CHECK(ds.n_raters() == 5);
  CHECK(std::is_sorted(ds.records.begin(), ds.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.subject, a.method, a.time) < std::tie(b.subject, b.method, b.time);
  }));
  for (const auto& times : ds.subject_times) CHECK(times == std::vector<double>{1.0, 2.0});
}

TEST_CASE("widen_to_long rater index space is shared across methods") {
  LongDataset one = widen_to_long({row("1", 1, 0, 1, "A", "A")});
  CHECK(one.records.size() == 2);
  CHECK(one.n_subjects() == 1);
  CHECK(one.n_raters() == 1);
  LongDataset two = widen_to_long({row("1", 1, 0, 1, "A", "B")});
  CHECK(two.n_raters() == 2);

  // 20 subjects seen by 6 distinct raters across both columns.
  std::vector<PairedRecord> paired;
  const char* raters[] = {"R1", "R2", "R3", "R4", "R5", "R6"};
  for (int i = 0; i < 20; ++i)
    paired.push_back(row(std::to_string(i), 1, 1, 1, raters[i % 3], raters[3 + i % 3]));
  CHECK(widen_to_long(paired).n_raters() == 6);
}

TEST_CASE("pair_up inverts widen_to_long and index maps are bijections") {
  std::mt19937 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PairedRecord> paired;
    const int n_subjects = 2 + gen() % 6;
    for (int i = 0; i < n_subjects; ++i) {
      const int n_times = 1 + gen() % 4;
      for (int t = 0; t < n_times; ++t)
        paired.push_back(row("id" + std::to_string(i), t * 1.5 + (gen() % 2) * 0.25,
                             static_cast<int>(gen() % 2), static_cast<int>(gen() % 2),
                             "r" + std::to_string(gen() % 5), "r" + std::to_string(gen() % 5)));
    }
    std::shuffle(paired.begin(), paired.end(), gen);
    const LongDataset ds = widen_to_long(paired);
    CHECK(ds.records.size() == 2 * paired.size());
    CHECK(std::set<std::string>(ds.subject_labels.begin(), ds.subject_labels.end()).size() ==
          ds.subject_labels.size());
    CHECK(std::set<std::string>(ds.rater_labels.begin(), ds.rater_labels.end()).size() ==
          ds.rater_labels.size());
    std::vector<int> seen_subject(ds.n_subjects()), seen_rater(ds.n_raters());
    for (const auto& r : ds.records) {
      seen_subject.at(r.subject) = 1;
      seen_rater.at(r.rater) = 1;
    }
    CHECK(std::count(seen_subject.begin(), seen_subject.end(), 1) == ds.n_subjects());
    CHECK(std::count(seen_rater.begin(), seen_rater.end(), 1) == ds.n_raters());

    auto back = pair_up(ds);
    const auto key = [](const PairedRecord& r) { return std::tie(r.subject_id, r.time); };
    std::sort(back.begin(), back.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    std::sort(paired.begin(), paired.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    CHECK(back == paired);
  }
}

TEST_CASE("pair_up rejects a visit without its partner") {
  LongDataset ds = widen_to_long({row("1", 1, 0, 1, "A", "B"), row("1", 2, 0, 1, "A", "B")});
  ds.records.pop_back();
  CHECK_THROWS_AS(pair_up(ds), DataError);
}

TEST_CASE("write_wide_csv output parses back") {
  const std::vector<PairedRecord> paired = {row("a,b", 1, 1, 0, "R \"1\"", "R2"),
                                            row("c", 2.5, 0, 1, "R2", "R3")};
  CHECK(parse_wide_csv(write_wide_csv(paired)) == paired);
}

TEST_CASE("validate reports separation, balance and prevalence") {
  std::vector<PairedRecord> all_one;
  for (int i = 0; i < 3; ++i)
    for (int t = 1; t <= 2; ++t) all_one.push_back(row(std::to_string(i), t, 1, 1, "A", "B"));
  const ValidationReport sep = validate(widen_to_long(all_one));
  CHECK(sep.constant_response);
  CHECK(std::find(sep.flags.begin(), sep.flags.end(),
                  "complete separation: constant response") != sep.flags.end());
  CHECK(sep.prevalence_m1 == 1.0);

  std::vector<PairedRecord> unbalanced = {row("1", 1, 1, 0, "A", "B"), row("1", 2, 0, 0, "B", "A"),
                                          row("1", 3, 1, 1, "A", "C"), row("2", 1, 0, 1, "C", "A")};
  const ValidationReport u = validate(widen_to_long(unbalanced));
  CHECK(u.min_times == 1);
  CHECK(u.max_times == 3);
  CHECK_FALSE(u.balanced());
  CHECK(u.prevalence_m1 == doctest::Approx(0.5));
  CHECK(u.prevalence_m2 == doctest::Approx(0.5));
  CHECK(u.constant_subjects.empty());

  std::vector<PairedRecord> balanced;
  for (int i = 0; i < 100; ++i)
    for (int t = 1; t <= 5; ++t)
      balanced.push_back(row(std::to_string(i), t, (i + t) % 2, i % 2, "A", i % 3 ? "B" : "C"));
  const ValidationReport b = validate(widen_to_long(balanced));
  CHECK(b.min_times == 5);
  CHECK(b.max_times == 5);
  CHECK(b.n_records == 1000);
  // A only administers method 1; B and C only method 2.
  CHECK(b.single_method_raters.size() == 3);
}
