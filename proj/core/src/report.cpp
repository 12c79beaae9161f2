#include "darwin/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "darwin/diff.hpp"
#include "darwin/errors.hpp"
#include "json.hpp"

namespace darwin {

using nlohmann::json;
namespace fs = std::filesystem;

double cost_estimate(double total_machine_seconds, double rate_per_hour) {
  const double amount = total_machine_seconds / 3600.0 * rate_per_hour;
  return std::llround(amount * 100.0) / 100.0;
}

void describe_changes(const Extraction& extraction, const Genome& genome,
                      std::vector<DdsChange>& dds, std::vector<CapacityChange>& caps) {
  const auto& schema = extraction.schema;
  schema.ensure_bounds(genome);
  for (std::size_t i = 0; i < schema.genes.size(); ++i) {
    if (genome.values[i] == schema.seed.values[i]) continue;
    const auto& gene = schema.genes[i];
    const Site& site = schema.sites.at(gene.site_id);
    const auto& group = extraction.store.groups[site.group_index];
    if (gene.kind == GeneKind::Impl) {
      const auto impls = group.effective_impls();
      dds.push_back({site.id, group.adt_name,
                     impls.at(schema.seed.values[i]).name,
                     impls.at(genome.values[i]).name});
    } else {
      auto cap_name = [&](int v) {
        return v == 0 ? std::string("ORIGINAL")
                      : std::to_string(group.capacity_domain.at(v - 1));
      };
      caps.push_back({site.id, cap_name(schema.seed.values[i]),
                      cap_name(genome.values[i])});
    }
  }
}

std::vector<TallyRow> dds_change_tally(const std::vector<SolutionRecord>& solutions) {
  if (solutions.empty()) return {};

  // per objective, the set of solutions achieving the best median
  std::array<std::vector<const SolutionRecord*>, 3> best_sets;
  for (int o = 0; o < 3; ++o) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : solutions) best = std::min(best, s.verify.objectives[o]);
    for (const auto& s : solutions) {
      if (s.verify.objectives[o] == best) best_sets[o].push_back(&s);
    }
  }

  std::map<std::pair<std::string, std::string>, std::array<int, 3>> counts;
  for (int o = 0; o < 3; ++o) {
    for (const auto* s : best_sets[o]) {
      for (const auto& change : s->dds_changes) {
        counts[{change.from_impl, change.to_impl}][o] += 1;
      }
    }
  }

  std::vector<TallyRow> rows;
  for (const auto& [key, per_objective] : counts) {
    rows.push_back({key.first, key.second, per_objective});
  }
  return rows;
}

FrontReport build_report(const std::vector<Genome>& front, const Measurement& baseline,
                         Evaluator& evaluator) {
  FrontReport report;
  report.baseline = baseline;
  report.rate_per_hour = evaluator.config().rate_per_hour;
  report.currency = evaluator.config().currency;

  for (int o = 0; o < 3; ++o) {
    const auto samples = baseline.objective_samples(o);
    report.baseline_ci[o] = median_ci(samples, 0.95);
  }

  const auto& extraction = evaluator.extraction();
  int next_id = 0;
  for (const auto& genome : front) {
    const auto outcome = evaluator.evaluate(genome, EvalMode::Verify);
    if (!outcome.feasible) {
      ++report.infeasible_on_verify;
      continue;
    }

    SolutionRecord rec;
    rec.id = next_id++;
    rec.genome = genome;
    rec.hash = genome_hash(genome);
    rec.verify = outcome.measurement;
    rec.classification =
        classify_vs_baseline(rec.verify.objectives, baseline.objectives);
    for (int o = 0; o < 3; ++o) {
      // a sub-tick test can legitimately measure a zero median (cpu load of
      // a briefly-running tree); the ratio is undefined there, so report it
      // as neutral and let the rank test speak
      rec.percent[o] =
          baseline.objectives[o] > 0
              ? percent_of_baseline(rec.verify.objectives[o], baseline.objectives[o])
              : 100.0;
      const auto a = rec.verify.objective_samples(o);
      const auto b = baseline.objective_samples(o);
      const auto mw = mann_whitney_u(a, b, Alternative::Less);
      rec.p_values[o] = mw.p;
      rec.significant[o] = mw.p < report.significance_alpha;
    }
    describe_changes(extraction, genome, rec.dds_changes, rec.capacity_changes);
    rec.diff_rel_path = "diffs/solution-" + std::to_string(rec.id) + ".patch";

    switch (rec.classification) {
      case BaselineClass::StrictlyDominant: ++report.strictly_dominant; break;
      case BaselineClass::NonDominated: ++report.non_dominated; break;
      case BaselineClass::Dominated: ++report.dominated; break;
    }
    report.solutions.push_back(std::move(rec));
  }

  // per-solution diffs against the original tree, rendered in memory
  for (auto& rec : report.solutions) {
    TreeDiff tree;
    for (const auto& tf : extraction.files) {
      auto fd = unified_diff_text(
          tf.original,
          render_file(tf, extraction.schema, extraction.store, rec.genome), tf.path);
      tree.changed_lines += fd.changed;
      if (!fd.unified.empty()) tree.files.push_back(std::move(fd));
    }
    rec.changed_lines = tree.changed_lines;
    rec.diff_text = tree.full_text();
  }

  report.tally = dds_change_tally(report.solutions);
  report.machine_seconds = evaluator.total_machine_seconds();
  report.cost = cost_estimate(report.machine_seconds, report.rate_per_hour);
  return report;
}

namespace {

std::string fmt(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string human_bytes(double bytes) {
  const char* units[] = {"B", "KiB", "MiB", "GiB"};
  int u = 0;
  while (bytes >= 1024 && u < 3) {
    bytes /= 1024;
    ++u;
  }
  return fmt(bytes, u == 0 ? 0 : 1) + " " + units[u];
}

std::string percent_bar(double percent) {
  // 50 chars represent 0..125%; values beyond the scale saturate
  const int width = 50;
  int filled = static_cast<int>(std::lround(percent / 125.0 * width));
  filled = std::clamp(filled, 0, width);
  std::string bar(filled, '#');
  bar.resize(width, '.');
  return bar;
}

const char* objective_name(int o) {
  return o == 0 ? "time" : o == 1 ? "memory" : "cpu";
}

}  // namespace

std::string render_report_md(const FrontReport& report) {
  std::ostringstream md;
  md << "# Optimization report\n\n";
  md << "## Baseline\n\n";
  md << "| objective | median | 95% CI |\n";
  md << "|---|---|---|\n";
  md << "| time | " << fmt(report.baseline.objectives[0], 4) << " s | ["
     << fmt(report.baseline_ci[0].lo, 4) << ", " << fmt(report.baseline_ci[0].hi, 4)
     << "] |\n";
  md << "| memory | " << human_bytes(report.baseline.objectives[1]) << " | ["
     << human_bytes(report.baseline_ci[1].lo) << ", "
     << human_bytes(report.baseline_ci[1].hi) << "] |\n";
  md << "| cpu | " << fmt(report.baseline.objectives[2]) << " | ["
     << fmt(report.baseline_ci[2].lo) << ", " << fmt(report.baseline_ci[2].hi)
     << "] |\n\n";

  md << "## Pareto front\n\n";
  md << report.solutions.size() << " feasible solution(s): " << report.strictly_dominant
     << " strictly dominant, " << report.non_dominated << " non-dominated, "
     << report.dominated << " dominated";
  if (report.infeasible_on_verify > 0) {
    md << " (" << report.infeasible_on_verify << " dropped as infeasible on re-measurement)";
  }
  md << ".\n\n";

  if (report.solutions.empty()) {
    md << "No feasible solutions to report.\n\n";
  } else {
    md << "Percent of baseline (under 100 is an improvement); * marks one-sided "
          "Mann-Whitney p < " << fmt(report.significance_alpha) << ".\n\n";
    md << "| # | time % | memory % | cpu % | classification | changes | lines |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const auto& s : report.solutions) {
      md << "| " << s.id << " |";
      for (int o = 0; o < 3; ++o) {
        md << " " << fmt(s.percent[o], 1) << (s.significant[o] ? "*" : "") << " |";
      }
      md << " " << baseline_class_name(s.classification) << " | "
         << s.dds_changes.size() + s.capacity_changes.size() << " | "
         << s.changed_lines << " |\n";
    }
    md << "\n";

    for (const auto& s : report.solutions) {
      md << "### Solution " << s.id << "\n\n";
      md << "```\n";
      for (int o = 0; o < 3; ++o) {
        char line[32];
        std::snprintf(line, sizeof line, "%-7s%7.1f%%  ", objective_name(o),
                      s.percent[o]);
        md << line << percent_bar(s.percent[o]) << (s.significant[o] ? " *" : "")
           << "\n";
      }
      md << "```\n\n";
      for (const auto& c : s.dds_changes) {
        md << "- site " << c.site_id << " (" << c.group << "): " << c.from_impl
           << " -> " << c.to_impl << "\n";
      }
      for (const auto& c : s.capacity_changes) {
        md << "- site " << c.site_id << " capacity: " << c.from << " -> " << c.to << "\n";
      }
      md << "- diff: `" << s.diff_rel_path << "` (" << s.changed_lines
         << " line(s) changed)\n\n";
    }
  }

  if (!report.tally.empty()) {
    md << "## Implementation changes across objective-best solutions\n\n";
    md << "A solution counts in every column where it is the per-objective best.\n\n";
    md << "| change | time | memory | cpu |\n";
    md << "|---|---|---|---|\n";
    for (const auto& row : report.tally) {
      md << "| " << row.from_impl << " -> " << row.to_impl << " | " << row.counts[0]
         << " | " << row.counts[1] << " | " << row.counts[2] << " |\n";
    }
    md << "\n";
  }

  md << "## Cost\n\n";
  md << "Total machine time " << fmt(report.machine_seconds / 3600.0, 3) << " h at "
     << report.currency << fmt(report.rate_per_hour) << "/h = " << report.currency
     << fmt(report.cost) << "\n";
  return md.str();
}

namespace {

json ci_to_json(const CiEstimate& ci) {
  return json{{"median", ci.median},
              {"lo", ci.lo},
              {"hi", ci.hi},
              {"confidence", ci.confidence}};
}

}  // namespace

std::string render_pareto_json(const FrontReport& report) {
  json j;
  j["baseline"] = {
      {"objectives", report.baseline.objectives},
      {"runs", report.baseline.samples.size()},
      {"samples_summary",
       {{"time", ci_to_json(report.baseline_ci[0])},
        {"memory", ci_to_json(report.baseline_ci[1])},
        {"cpu", ci_to_json(report.baseline_ci[2])}}},
  };

  j["solutions"] = json::array();
  for (const auto& s : report.solutions) {
    json sj;
    sj["id"] = s.id;
    sj["genome"] = s.genome.values;
    sj["hash"] = s.hash;
    sj["objectives"] = s.verify.objectives;
    sj["percent"] = s.percent;
    sj["classification"] = baseline_class_name(s.classification);
    sj["significant"] = s.significant;
    sj["p_values"] = s.p_values;
    sj["dds_changes"] = json::array();
    for (const auto& c : s.dds_changes) {
      sj["dds_changes"].push_back({{"site", c.site_id},
                                   {"group", c.group},
                                   {"from", c.from_impl},
                                   {"to", c.to_impl}});
    }
    sj["capacity_changes"] = json::array();
    for (const auto& c : s.capacity_changes) {
      sj["capacity_changes"].push_back(
          {{"site", c.site_id}, {"from", c.from}, {"to", c.to}});
    }
    sj["changed_lines"] = s.changed_lines;
    sj["diff"] = s.diff_rel_path;
    j["solutions"].push_back(std::move(sj));
  }

  j["tally"] = json::array();
  for (const auto& row : report.tally) {
    j["tally"].push_back({{"change", row.from_impl + " -> " + row.to_impl},
                          {"time", row.counts[0]},
                          {"memory", row.counts[1]},
                          {"cpu", row.counts[2]}});
  }
  j["tally_note"] =
      "a solution is counted in every objective column where it is the per-objective best";

  j["cost"] = {{"machine_seconds", report.machine_seconds},
               {"hours", report.machine_seconds / 3600.0},
               {"rate_per_hour", report.rate_per_hour},
               {"currency", report.currency},
               {"amount", report.cost}};
  j["infeasible_on_verify"] = report.infeasible_on_verify;
  return j.dump(2) + "\n";
}

void emit_artifacts(const FrontReport& report, const Extraction& extraction,
                    const fs::path& out_dir) {
  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "diffs");

  auto write = [](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
  };

  write(out_dir / "report.md", render_report_md(report));
  write(out_dir / "pareto.json", render_pareto_json(report));

  for (const auto& s : report.solutions) {
    write(out_dir / s.diff_rel_path, s.diff_text);
  }

  const char* tree_names[3] = {"best-time", "best-memory", "best-cpu"};
  for (int o = 0; o < 3; ++o) {
    const SolutionRecord* best = nullptr;
    for (const auto& s : report.solutions) {
      if (!best || s.verify.objectives[o] < best->verify.objectives[o]) best = &s;
    }
    if (!best) continue;
    const fs::path tree = out_dir / tree_names[o];
    std::error_code ec;
    fs::remove_all(tree, ec);
    materialize(extraction, best->genome, tree);
  }
}

}  // namespace darwin
