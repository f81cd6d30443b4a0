#include "binagree/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <utility>

#include "binagree/csv.hpp"
#include "binagree/errors.hpp"

namespace binagree {
namespace {

int find_column(const csv::Row& header, const std::string& name) {
  for (std::size_t i = 0; i < header.fields.size(); ++i)
    if (header.fields[i] == name) return static_cast<int>(i);
  throw ParseError("missing column '" + name + "' in header", header.line);
}

int map_outcome(const std::string& token, const OutcomeLabels& labels, long line) {
  if (token == labels.positive) return 1;
  if (token == labels.negative) return 0;
  throw ParseError("unknown outcome label '" + token + "' (expected '" + labels.positive +
                       "' or '" + labels.negative + "')",
                   line);
}

int intern(std::unordered_map<std::string, int>& index, std::vector<std::string>& labels,
           const std::string& label) {
  const auto [it, inserted] = index.try_emplace(label, static_cast<int>(labels.size()));
  if (inserted) labels.push_back(label);
  return it->second;
}

}  // namespace

std::vector<PairedRecord> parse_wide_csv(std::string_view text, const OutcomeLabels& labels,
                                         const CsvColumns& columns) {
  const std::vector<csv::Row> rows = csv::parse(text);
  if (rows.empty()) throw ParseError("missing header row");

  const csv::Row& header = rows.front();
  const int c_id = find_column(header, columns.id);
  const int c_time = find_column(header, columns.time);
  const int c_y1 = find_column(header, columns.outcome_m1);
  const int c_y2 = find_column(header, columns.outcome_m2);
  const int c_r1 = find_column(header, columns.rater_m1);
  const int c_r2 = find_column(header, columns.rater_m2);

  std::vector<PairedRecord> out;
  out.reserve(rows.size() - 1);
  std::map<std::pair<std::string, double>, long> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const csv::Row& row = rows[r];
    if (row.fields.size() != header.fields.size())
      throw ParseError("expected " + std::to_string(header.fields.size()) + " fields, found " +
                           std::to_string(row.fields.size()),
                       row.line);
    PairedRecord rec;
    rec.subject_id = row.fields[c_id];
    if (rec.subject_id.empty()) throw ParseError("empty subject id", row.line);
    if (!csv::parse_double(row.fields[c_time], rec.time) || !std::isfinite(rec.time))
      throw ParseError("invalid time '" + row.fields[c_time] + "'", row.line);
    rec.outcome_m1 = map_outcome(row.fields[c_y1], labels, row.line);
    rec.outcome_m2 = map_outcome(row.fields[c_y2], labels, row.line);
    rec.rater_m1 = row.fields[c_r1];
    rec.rater_m2 = row.fields[c_r2];
    if (rec.rater_m1.empty() || rec.rater_m2.empty())
      throw ParseError("empty rater label", row.line);

    const auto [it, inserted] = seen.try_emplace({rec.subject_id, rec.time}, row.line);
    if (!inserted)
      throw ParseError("duplicate (id, time) = (" + rec.subject_id + ", " + row.fields[c_time] +
                           "), first seen on line " + std::to_string(it->second),
                       row.line);
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw ParseError("empty dataset");
  return out;
}

std::string write_wide_csv(const std::vector<PairedRecord>& paired, const OutcomeLabels& labels,
                           const CsvColumns& columns) {
  std::string out = csv::join({csv::escape(columns.id), csv::escape(columns.time),
                               csv::escape(columns.outcome_m1), csv::escape(columns.outcome_m2),
                               csv::escape(columns.rater_m1), csv::escape(columns.rater_m2)});
  out.push_back('\n');
  const auto label = [&](int y) { return csv::escape(y ? labels.positive : labels.negative); };
  for (const PairedRecord& p : paired) {
    out += csv::join({csv::escape(p.subject_id), csv::format_double(p.time), label(p.outcome_m1),
                      label(p.outcome_m2), csv::escape(p.rater_m1), csv::escape(p.rater_m2)});
    out.push_back('\n');
  }
  return out;
}

LongDataset widen_to_long(const std::vector<PairedRecord>& paired) {
  LongDataset ds;
  std::unordered_map<std::string, int> subject_index;
  std::unordered_map<std::string, int> rater_index;
  ds.records.reserve(2 * paired.size());
  for (const PairedRecord& p : paired) {
    const int s = intern(subject_index, ds.subject_labels, p.subject_id);
    const int r1 = intern(rater_index, ds.rater_labels, p.rater_m1);
    const int r2 = intern(rater_index, ds.rater_labels, p.rater_m2);
    ds.records.push_back({s, r1, Method::first, p.time, p.outcome_m1});
    ds.records.push_back({s, r2, Method::second, p.time, p.outcome_m2});
  }
  std::stable_sort(ds.records.begin(), ds.records.end(),
                   [](const MeasurementRecord& a, const MeasurementRecord& b) {
                     if (a.subject != b.subject) return a.subject < b.subject;
                     if (a.method != b.method) return slot(a.method) < slot(b.method);
                     return a.time < b.time;
                   });

  ds.subject_times.assign(ds.subject_labels.size(), {});
  for (const MeasurementRecord& r : ds.records)
    ds.subject_times[r.subject].push_back(r.time);
  for (auto& times : ds.subject_times) {
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
  }
  return ds;
}

std::vector<PairedRecord> pair_up(const LongDataset& ds) {
  std::map<std::pair<int, double>, std::pair<const MeasurementRecord*, const MeasurementRecord*>>
      visits;
  for (const MeasurementRecord& r : ds.records) {
    auto& slot_pair = visits[{r.subject, r.time}];
    (r.method == Method::first ? slot_pair.first : slot_pair.second) = &r;
  }
  std::vector<PairedRecord> out;
  out.reserve(visits.size());
  for (const auto& [key, pair] : visits) {
    if (!pair.first || !pair.second)
      throw DataError("subject '" + ds.subject_labels[key.first] + "' at time " +
                      csv::format_double(key.second) + " lacks a measurement for method " +
                      (pair.first ? "2" : "1"));
    out.push_back({ds.subject_labels[key.first], key.second, pair.first->outcome,
                   pair.second->outcome, ds.rater_labels[pair.first->rater],
                   ds.rater_labels[pair.second->rater]});
  }
  return out;
}

ValidationReport validate(const LongDataset& ds) {
  ValidationReport rep;
  rep.n_subjects = ds.n_subjects();
  rep.n_raters = ds.n_raters();
  rep.n_records = ds.records.size();

  std::vector<int> positives(ds.n_subjects(), 0), totals(ds.n_subjects(), 0);
  std::vector<int> rater_methods(ds.n_raters(), 0);  // bit 0: method 1, bit 1: method 2
  int pos_m[2] = {0, 0}, n_m[2] = {0, 0};
  for (const MeasurementRecord& r : ds.records) {
    positives[r.subject] += r.outcome;
    totals[r.subject] += 1;
    rater_methods[r.rater] |= 1 << slot(r.method);
    pos_m[slot(r.method)] += r.outcome;
    n_m[slot(r.method)] += 1;
  }

  for (int s = 0; s < ds.n_subjects(); ++s)
    if (totals[s] > 0 && (positives[s] == 0 || positives[s] == totals[s]))
      rep.constant_subjects.push_back(ds.subject_labels[s]);
  for (int j = 0; j < ds.n_raters(); ++j)
    if (rater_methods[j] != 3) rep.single_method_raters.push_back(ds.rater_labels[j]);

  if (!ds.subject_times.empty()) {
    const auto [lo, hi] = std::minmax_element(
        ds.subject_times.begin(), ds.subject_times.end(),
        [](const auto& a, const auto& b) { return a.size() < b.size(); });
    rep.min_times = static_cast<int>(lo->size());
    rep.max_times = static_cast<int>(hi->size());
  }
  for (int m = 0; m < 2; ++m) {
    const double p = n_m[m] ? static_cast<double>(pos_m[m]) / n_m[m] : 0.0;
    (m == 0 ? rep.prevalence_m1 : rep.prevalence_m2) = p;
    rep.constant_within_method[m] = n_m[m] > 0 && (pos_m[m] == 0 || pos_m[m] == n_m[m]);
  }
  const int pos_all = pos_m[0] + pos_m[1];
  const int n_all = n_m[0] + n_m[1];
  rep.constant_response = n_all > 0 && (pos_all == 0 || pos_all == n_all);

  if (rep.constant_response)
    rep.flags.push_back("complete separation: constant response");
  else
    for (int m = 0; m < 2; ++m)
      if (rep.constant_within_method[m])
        rep.flags.push_back("complete separation: constant response within method " +
                            std::to_string(m + 1));
  if (!rep.constant_subjects.empty())
    rep.flags.push_back(std::to_string(rep.constant_subjects.size()) +
                        " subject(s) with all-identical outcomes");
  if (!rep.single_method_raters.empty())
    rep.flags.push_back(std::to_string(rep.single_method_raters.size()) +
                        " rater(s) appear under only one method");
  if (!rep.balanced())
    rep.flags.push_back("unbalanced: visits per subject range from " +
                        std::to_string(rep.min_times) + " to " + std::to_string(rep.max_times));
  if (rep.n_subjects < 2) rep.flags.push_back("fewer than 2 subjects");
  if (rep.n_raters < 2) rep.flags.push_back("fewer than 2 raters");
  return rep;
}

}  // namespace binagree
