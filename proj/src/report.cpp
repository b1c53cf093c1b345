#include "rankjoint/report.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "rankjoint/error.hpp"

namespace rankjoint {

namespace {

std::set<CoefficientLabel> amce_labels(const AmceFit& fit) {
  std::set<CoefficientLabel> out;
  for (const auto& l : fit.labels) {
    if (!l.is_intercept()) out.insert(l);
  }
  return out;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

Report build_report(const ReportInputs& inputs) {
  if (inputs.fits.empty() && inputs.theoretical_K.empty() && !inputs.consistency) {
    throw UsageError("report: nothing to report");
  }
  Report report;
  Json& out = report.json;
  std::ostringstream text;

  if (!inputs.fits.empty()) {
    const auto reference = amce_labels(inputs.fits.front().fit);
    for (const auto& nf : inputs.fits) {
      if (amce_labels(nf.fit) != reference) {
        throw DataError("report: fit '" + nf.name + "' has a different coefficient label set from '" +
                        inputs.fits.front().name + "'");
      }
    }

    Json table = Json::array();
    text << "AMCE estimates (SE)\n";
    text << pad("coefficient", 32);
    for (const auto& nf : inputs.fits) text << pad(nf.name, 22);
    text << "\n";
    for (const auto& label : inputs.fits.front().fit.labels) {
      if (label.is_intercept()) continue;
      Json row{{"attribute", label.attribute}, {"level", label.level}};
      Json estimates = Json::object();
      text << pad(label.str(), 32);
      for (const auto& nf : inputs.fits) {
        const auto i = static_cast<Eigen::Index>(*nf.fit.index_of(label));
        estimates[nf.name] = {{"estimate", nf.fit.beta(i)}, {"se", nf.fit.se(i)},
                              {"ci_lower", nf.fit.ci_lower(i)}, {"ci_upper", nf.fit.ci_upper(i)}};
        text << pad(fixed(nf.fit.beta(i)) + " (" + fixed(nf.fit.se(i)) + ")", 22);
      }
      text << "\n";
      row["fits"] = std::move(estimates);
      table.push_back(std::move(row));
    }
    out["coefficients"] = std::move(table);

    Json importance = Json::object();
    for (const auto& nf : inputs.fits) importance[nf.name] = importance_json(nf.fit);
    out["attribute_importance"] = std::move(importance);

    if (inputs.fits.size() > 1) {
      const auto& base = inputs.fits.front();
      Json comparisons = Json::array();
      text << "\nEfficiency relative to " << base.name << "\n";
      for (std::size_t k = 1; k < inputs.fits.size(); ++k) {
        const auto& other = inputs.fits[k];
        const auto se = empirical_se_comparison(base.fit, other.fit);
        Json entry{{"reference", base.name},
                   {"design", other.name},
                   {"mean_se_ratio", se.mean_ratio},
                   {"ratio_of_mean_se", se.ratio_of_means},
                   {"se_reduction", se.reduction},
                   {"fcc_sample_multiplier", fcc_sample_multiplier_from_reduction(se.reduction)},
                   {"z_tests", to_json(z_test_coefficients(base.fit, other.fit))}};
        text << "  " << pad(other.name, 20) << "SE ratio " << fixed(se.mean_ratio, 3)
             << "  reduction " << fixed(100.0 * se.reduction, 1) << "%"
             << "  FCC multiplier " << fixed(fcc_sample_multiplier_from_reduction(se.reduction), 2);
        if (base.seconds && other.seconds) {
          const double rel = relative_precision_per_time(base.fit, *base.seconds, other.fit,
                                                         *other.seconds, inputs.aggregation);
          entry["relative_precision_per_time"] = rel;
          entry["precision_aggregation"] = std::string(to_string(inputs.aggregation));
          text << "  precision/time x" << fixed(rel, 3);
        }
        text << "\n";
        comparisons.push_back(std::move(entry));
      }
      out["comparisons"] = std::move(comparisons);
    }
  }

  if (!inputs.theoretical_K.empty()) {
    Json table = Json::array();
    text << "\nTheoretical efficiency under the null\n";
    text << "  K   variance ratio   SE ratio   SE reduction   FCC multiplier\n";
    for (int K : inputs.theoretical_K) {
      const auto r = theoretical_efficiency(K);
      table.push_back(to_json(r));
      text << "  " << pad(std::to_string(K), 4) << pad(fixed(r.variance_ratio), 17)
           << pad(fixed(r.se_ratio), 11) << pad(fixed(100.0 * r.se_reduction, 1) + "%", 15)
           << fixed(r.fcc_sample_multiplier, 2) << "\n";
    }
    out["theoretical"] = std::move(table);
  }

  if (inputs.consistency) {
    out["consistency"] = *inputs.consistency;
    for (const char* kind : {"transitivity", "iia"}) {
      if (!inputs.consistency->contains(kind)) continue;
      const auto& s = (*inputs.consistency)[kind];
      text << "\n" << kind << " violations\n";
      for (const auto& c : s.value("conditions", Json::array())) {
        text << "  " << pad(c.value("condition", std::string()), 12)
             << fixed(100.0 * c.value("rate", 0.0), 1) << "% of " << c.value("n", 0) << "\n";
      }
      for (const auto& t : s.value("tests", Json::array())) {
        text << "  " << t.value("condition_a", std::string()) << " vs "
             << t.value("condition_b", std::string()) << ": p = " << fixed(t.value("p", 1.0), 4)
             << "\n";
      }
    }
  }
  report.text = text.str();
  return report;
}

}  // namespace rankjoint
