#include "aed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "aed/error.hpp"

namespace aed {

std::vector<Hypothesis> verify(std::span<const Hypothesis> hyps, const SpanClassifier& classify,
                               const AudioSignal& signal, VerifyStats* stats) {
  constexpr double kSlack = 1e-9;
  const double duration = signal.duration();
  VerifyStats local;
  std::vector<Hypothesis> out;
  for (const auto& h : hyps) {
    if (h.onset < -kSlack || h.offset > duration + kSlack || !(h.offset > h.onset))
      fail(Errc::out_of_range, "hypothesis [" + std::to_string(h.onset) + ", " +
                                   std::to_string(h.offset) + "] lies outside the signal (" +
                                   std::to_string(duration) + " s)");
    const std::optional<int> label = classify(signal, h.onset, h.offset);
    if (!label) {
      ++local.unverifiable;
      out.push_back(h);
    } else if (*label == h.label) {
      ++local.kept;
      out.push_back(h);
    } else {
      ++local.rejected;
    }
  }
  if (stats) *stats = local;
  return out;
}

MatchResult match_events(std::span<const Hypothesis> hyps, std::span<const EventAnnotation> refs,
                         const MatchOptions& options) {
  struct Candidate {
    double overlap;
    std::size_t h, r;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < hyps.size(); ++i)
    for (std::size_t j = 0; j < refs.size(); ++j) {
      const auto& h = hyps[i];
      const auto& r = refs[j];
      if (h.label != r.label) continue;
      const double ov = overlap(h.onset, h.offset, r.onset, r.offset);
      bool compatible = false;
      if (options.rule == MatchRule::center) {
        const double hc = h.center();
        const double rc = r.center();
        compatible = (hc >= r.onset && hc <= r.offset) || (rc >= h.onset && rc <= h.offset);
      } else {
        const double uni = std::max(h.offset, r.offset) - std::min(h.onset, r.onset);
        compatible = uni > 0.0 && ov / uni >= options.min_ratio;
      }
      if (compatible) candidates.push_back({ov, i, j});
    }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (refs[a.r].onset != refs[b.r].onset) return refs[a.r].onset < refs[b.r].onset;
    if (a.r != b.r) return a.r < b.r;
    if (hyps[a.h].onset != hyps[b.h].onset) return hyps[a.h].onset < hyps[b.h].onset;
    return a.h < b.h;
  });

  std::vector<bool> h_used(hyps.size(), false), r_used(refs.size(), false);
  MatchResult m;
  for (const auto& c : candidates) {
    if (h_used[c.h] || r_used[c.r]) continue;
    h_used[c.h] = r_used[c.r] = true;
    m.pairs.emplace_back(c.h, c.r);
  }
  std::sort(m.pairs.begin(), m.pairs.end());
  for (std::size_t i = 0; i < hyps.size(); ++i)
    if (!h_used[i]) m.false_positives.push_back(i);
  for (std::size_t j = 0; j < refs.size(); ++j)
    if (!r_used[j]) m.misses.push_back(j);
  return m;
}

Scores prf(std::size_t tp, std::size_t hyp_count, std::size_t ref_count) {
  require(tp <= hyp_count && tp <= ref_count, Errc::invalid_argument,
          "prf: true positives exceed a list size");
  Scores s;
  s.tp = tp;
  s.fp = hyp_count - tp;
  s.fn = ref_count - tp;
  if (hyp_count == 0)
    s.precision = ref_count == 0 ? 1.0 : 0.0;
  else
    s.precision = static_cast<double>(tp) / static_cast<double>(hyp_count);
  s.recall = ref_count == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(ref_count);
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

Scores prf(const MatchResult& m, std::size_t hyp_count, std::size_t ref_count) {
  require(m.pairs.size() + m.false_positives.size() == hyp_count &&
              m.pairs.size() + m.misses.size() == ref_count,
          Errc::invalid_argument, "prf: counts inconsistent with the match result");
  return prf(m.pairs.size(), hyp_count, ref_count);
}

DetectionReport make_report(const ClassInventory& classes) {
  DetectionReport r;
  r.classes = classes.names();
  r.per_class.assign(classes.size(), Scores{});
  r.finalize();
  return r;
}

void DetectionReport::add(std::span<const Hypothesis> hyps, std::span<const EventAnnotation> refs,
                          const MatchOptions& options) {
  const MatchResult m = match_events(hyps, refs, options);
  auto at = [&](int label) -> Scores& {
    require(label >= 0 && static_cast<std::size_t>(label) < per_class.size(), Errc::out_of_range,
            "report: label outside the class inventory");
    return per_class[static_cast<std::size_t>(label)];
  };
  for (const auto& [h, r] : m.pairs) ++at(hyps[h].label).tp;
  for (std::size_t h : m.false_positives) ++at(hyps[h].label).fp;
  for (std::size_t r : m.misses) ++at(refs[r].label).fn;
  finalize();
}

void DetectionReport::finalize() {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (auto& s : per_class) {
    s = prf(s.tp, s.tp + s.fp, s.tp + s.fn);
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
  }
  overall = prf(tp, tp + fp, tp + fn);
}

namespace {

MetricDelta delta(const Scores& a, const Scores& b) {
  return {a.precision - b.precision, a.recall - b.recall, a.f1 - b.f1};
}

std::string fixed(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

DeltaTable compare_reports(const DetectionReport& with_verification,
                           const DetectionReport& without) {
  if (with_verification.classes != without.classes)
    fail(Errc::config, "cannot compare reports over different class inventories");
  DeltaTable t;
  t.classes = without.classes;
  for (std::size_t c = 0; c < t.classes.size(); ++c)
    t.per_class.push_back(delta(with_verification.per_class[c], without.per_class[c]));
  t.overall = delta(with_verification.overall, without.overall);
  return t;
}

std::string format_delta(double d) {
  // Rounded to the displayed precision so that -0.0004 prints as a tie.
  const double r = std::round(d * 1000.0) / 1000.0;
  if (r > 0.0) return "↑ +" + fixed(r);
  if (r < 0.0) return "↓ " + fixed(r);
  return "= " + fixed(0.0);
}

std::string format_report(const DetectionReport& report, const DetectionReport* baseline) {
  std::optional<DeltaTable> deltas;
  if (baseline) deltas = compare_reports(report, *baseline);
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %6s %6s %6s  %-8s  %-7s  %-7s", "class", "TP", "FP", "FN",
                "F1", "P", "R");
  out << line << '\n';
  auto row = [&](const std::string& name, const Scores& s, const MetricDelta* d) {
    std::snprintf(line, sizeof line, "%-16s %6zu %6zu %6zu  %-8s  %-7s  %-7s", name.c_str(), s.tp,
                  s.fp, s.fn, fixed(s.f1).c_str(), fixed(s.precision).c_str(),
                  fixed(s.recall).c_str());
    out << line;
    if (d)
      out << "  dF1 " << format_delta(d->f1) << "  dP " << format_delta(d->precision) << "  dR "
          << format_delta(d->recall);
    out << '\n';
  };
  for (std::size_t c = 0; c < report.classes.size(); ++c)
    row(report.classes[c], report.per_class[c], deltas ? &deltas->per_class[c] : nullptr);
  row("overall", report.overall, deltas ? &deltas->overall : nullptr);
  return out.str();
}

nlohmann::json to_json(const Scores& s) {
  return {{"tp", s.tp},           {"fp", s.fp},         {"fn", s.fn},
          {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

nlohmann::json to_json(const DetectionReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < report.classes.size(); ++c)
    per_class[report.classes[c]] = to_json(report.per_class[c]);
  return {{"classes", report.classes}, {"per_class", per_class}, {"overall", to_json(report.overall)}};
}

DetectionReport report_from_json(const nlohmann::json& j) {
  try {
    DetectionReport r;
    r.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& name : r.classes) {
      const auto& s = j.at("per_class").at(name);
      Scores sc;
      sc.tp = s.at("tp").get<std::size_t>();
      sc.fp = s.at("fp").get<std::size_t>();
      sc.fn = s.at("fn").get<std::size_t>();
      r.per_class.push_back(sc);
    }
    r.finalize();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("malformed report: ") + e.what());
  }
}

}  // namespace aed
