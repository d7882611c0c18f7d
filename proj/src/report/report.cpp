/*
 *  Copyright 2026 The GapLab Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */


#include "gaplab/report/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace gaplab::report {

const std::vector<std::string>& criteria() {
  static const std::vector<std::string> kAll = {kSimplePattern,  kLicensing,       kIslandStringent, kIslandRelative,
                                                kIslandThreeWay, kFge,             kUge};
  return kAll;
}

namespace {

std::string sign(bool b) { return std::string(1, sign_char(b)); }

void check_header(const std::vector<std::vector<std::string>>& rows, const char* header, const char* what) {
  std::string got;
  if (!rows.empty()) {
    for (std::size_t i = 0; i < rows[0].size(); ++i) got += (i ? "," : "") + rows[0][i];
  }
  if (got != header) throw ParseError(std::string(what) + ": expected header '" + header + "'");
}

void check_width(const std::vector<std::string>& row, std::size_t n, const std::string& where) {
  if (row.size() != n) {
    throw ParseError(where + ": expected " + std::to_string(n) + " fields, got " + std::to_string(row.size()));
  }
}

Construction construction_field(const std::string& text, const std::string& where) {
  try {
    return parse_construction(text);
  } catch (const ConfigError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

std::size_t count_field(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": '" + text + "' is not a count");
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) s.erase(0, s[0] == '-' ? 1 : 0);
  return s;
}

}  // namespace

std::string effects_table(const std::vector<ModelEffect>& effects) {
  std::ostringstream out;
  out << kEffectsTableHeader << '\n';
  for (const auto& [model, e] : effects) {
    write_csv_row(out, {model, std::string(to_string(e.construction)), std::to_string(e.item_id), sign(e.gap),
                        sign(e.island), format_double(e.bits)});
  }
  return out.str();
}

std::vector<ModelEffect> parse_effects_table(std::string_view text) {
  const auto rows = parse_csv(text);
  check_header(rows, kEffectsTableHeader, "effects.csv");
  std::vector<ModelEffect> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = "effects.csv line " + std::to_string(i + 1);
    const auto& r = rows[i];
    check_width(r, 6, where);
    ModelEffect m;
    m.model_id = r[0];
    m.effect.construction = construction_field(r[1], where);
    m.effect.item_id = static_cast<int>(count_field(r[2], where));
    m.effect.gap = parse_sign(r[3]);
    m.effect.island = parse_sign(r[4]);
    m.effect.bits = parse_double(r[5]);
    out.push_back(std::move(m));
  }
  return out;
}

std::string summaries_table(const std::vector<ModelSummary>& summaries) {
  std::ostringstream out;
  out << kSummariesHeader << '\n';
  for (const auto& [model, s] : summaries) {
    write_csv_row(out, {model, std::string(to_string(s.construction)), sign(s.gap), sign(s.island),
                        format_double(s.mean), format_double(s.half_width), std::to_string(s.n)});
  }
  return out.str();
}

std::vector<ModelSummary> parse_summaries_table(std::string_view text) {
  const auto rows = parse_csv(text);
  check_header(rows, kSummariesHeader, "summaries.csv");
  std::vector<ModelSummary> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = "summaries.csv line " + std::to_string(i + 1);
    const auto& r = rows[i];
    check_width(r, 7, where);
    ModelSummary m;
    m.model_id = r[0];
    m.summary.construction = construction_field(r[1], where);
    m.summary.gap = parse_sign(r[2]);
    m.summary.island = parse_sign(r[3]);
    m.summary.mean = parse_double(r[4]);
    m.summary.half_width = parse_double(r[5]);
    m.summary.n = count_field(r[6], where);
    out.push_back(std::move(m));
  }
  return out;
}

std::string verdicts_table(const std::vector<VerdictRow>& verdicts) {
  std::ostringstream out;
  out << kVerdictsHeader << '\n';
  for (const auto& v : verdicts) {
    write_csv_row(out, {v.model_id, std::string(to_string(v.construction)), v.criterion, v.verdict});
  }
  return out.str();
}

std::vector<VerdictRow> parse_verdicts_table(std::string_view text) {
  const auto rows = parse_csv(text);
  check_header(rows, kVerdictsHeader, "verdicts.csv");
  std::vector<VerdictRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = "verdicts.csv line " + std::to_string(i + 1);
    const auto& r = rows[i];
    check_width(r, 4, where);
    out.push_back({r[0], construction_field(r[1], where), r[2], r[3]});
  }
  return out;
}

std::vector<fs::path> emit_tables(const ReportBundle& bundle, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::ostringstream fits;
  stats::write_fits_csv(fits, bundle.fits);
  const std::vector<std::pair<std::string, std::string>> files = {
      {"effects.csv", effects_table(bundle.effects)},
      {"summaries.csv", summaries_table(bundle.summaries)},
      {"fits.csv", fits.str()},
      {"verdicts.csv", verdicts_table(bundle.verdicts)}};
  std::vector<fs::path> written;
  for (const auto& [name, text] : files) {
    write_file_atomic(out_dir / name, text);
    written.push_back(out_dir / name);
  }
  return written;
}

ReportBundle read_tables(const fs::path& dir) {
  ReportBundle b;
  b.effects = parse_effects_table(read_file(dir / "effects.csv"));
  b.summaries = parse_summaries_table(read_file(dir / "summaries.csv"));
  b.fits = stats::parse_fits_csv(read_file(dir / "fits.csv"));
  b.verdicts = parse_verdicts_table(read_file(dir / "verdicts.csv"));
  return b;
}

// ---------------------------------------------------------------------------

std::string render_effect_chart(const std::vector<ModelSummary>& summaries, const std::vector<std::string>& models,
                                const std::vector<Construction>& constructions, const ChartStyle& style) {
  if (models.empty() || constructions.empty()) throw InvariantError("chart needs at least one model and construction");
  std::map<std::tuple<std::string, Construction, bool, bool>, const scoring::EffectSummary*> index;
  for (const auto& [model, s] : summaries) index[{model, s.construction, s.gap, s.island}] = &s;
  const auto get = [&](const std::string& model, Construction c, bool gap, bool island) {
    const auto it = index.find({model, c, gap, island});
    if (it == index.end()) {
      throw MissingSummaryError("no summary for model '" + model + "', " + std::string(to_string(c)) + " (" +
                                sign_char(gap) + "gap," + sign_char(island) + "island)");
    }
    return it->second;
  };

  struct Group {
    Construction construction;
    bool island;
  };
  std::vector<Group> groups;
  for (Construction c : constructions) {
    groups.push_back({c, false});
    const bool any_island = std::any_of(models.begin(), models.end(), [&](const std::string& m) {
      return index.contains({m, c, true, true}) || index.contains({m, c, false, true});
    });
    if (any_island) groups.push_back({c, true});
  }

  double lo = 0.0, hi = 0.0;
  for (const auto& m : models) {
    for (const auto& g : groups) {
      for (bool gap : {true, false}) {
        const auto* s = get(m, g.construction, gap, g.island);
        lo = std::min(lo, s->lower());
        hi = std::max(hi, s->upper());
      }
    }
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const int group_width = 2 * style.bar_width + 18;
  const int panel_w = style.panel_width > 0 ? style.panel_width
                                            : 2 * style.margin + static_cast<int>(groups.size()) * group_width;
  const int plot_top = style.margin;
  const int plot_h = style.panel_height - 2 * style.margin;
  const double scale = plot_h / (hi - lo);
  const double zero_y = plot_top + hi * scale;
  const int width = panel_w * static_cast<int>(models.size());
  const int height = style.panel_height + 40;
  const auto px = [](double v) { return fixed(v, 3); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"10\""
      << " data-px-per-bit=\"" << px(scale) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < models.size(); ++p) {
    const std::string& model = models[p];
    const int x0 = static_cast<int>(p) * panel_w;
    svg << "<g class=\"panel\" data-model=\"" << model << "\">\n"
        << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << plot_top - 24 << "\" text-anchor=\"middle\" font-size=\"13\">"
        << model << "</text>\n"
        << "<line class=\"axis\" x1=\"" << x0 + style.margin - 6 << "\" y1=\"" << plot_top << "\" x2=\""
        << x0 + style.margin - 6 << "\" y2=\"" << plot_top + plot_h << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << x0 + 12 << "\" y=\"" << px(zero_y) << "\" transform=\"rotate(-90 " << x0 + 12 << ' '
        << px(zero_y) << ")\" text-anchor=\"middle\">filler effect (bits)</text>\n";
    for (double tick : {lo + pad, 0.0, hi - pad}) {
      const double y = zero_y - tick * scale;
      svg << "<text x=\"" << x0 + style.margin - 9 << "\" y=\"" << px(y + 3) << "\" text-anchor=\"end\">"
          << fixed(tick, 2) << "</text>\n";
    }
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      const int gx = x0 + style.margin + static_cast<int>(gi) * group_width;
      int bar = 0;
      for (bool gap : {true, false}) {
        const auto* s = get(model, g.construction, gap, g.island);
        const double bx = gx + 4 + bar * style.bar_width;
        const double top = zero_y - std::max(s->mean, 0.0) * scale;
        const double h = std::fabs(s->mean) * scale;
        const double cx = bx + style.bar_width / 2.0;
        const std::string attrs = " data-model=\"" + model + "\" data-construction=\"" +
                                  std::string(to_string(g.construction)) + "\" data-gap=\"" + sign(gap) +
                                  "\" data-island=\"" + sign(g.island) + "\"";
        svg << "<rect class=\"bar\"" << attrs << " data-mean=\"" << format_double(s->mean) << "\" x=\"" << px(bx)
            << "\" y=\"" << px(top) << "\" width=\"" << style.bar_width << "\" height=\"" << px(h) << "\" fill=\""
            << (gap ? "#1f77b4" : "#ff7f0e") << "\"/>\n";
        svg << "<line class=\"whisker\"" << attrs << " data-ci=\"" << format_double(s->half_width) << "\" x1=\""
            << px(cx) << "\" y1=\"" << px(zero_y - s->upper() * scale) << "\" x2=\"" << px(cx) << "\" y2=\""
            << px(zero_y - s->lower() * scale) << "\" stroke=\"black\"/>\n";
        ++bar;
      }
      svg << "<text x=\"" << gx + 4 + style.bar_width << "\" y=\"" << plot_top + plot_h + 14
          << "\" text-anchor=\"middle\" font-size=\"8\">" << to_string(g.construction) << "</text>\n"
          << "<text x=\"" << gx + 4 + style.bar_width << "\" y=\"" << plot_top + plot_h + 24
          << "\" text-anchor=\"middle\" font-size=\"8\">" << (g.island ? "island" : "simple") << "</text>\n";
    }
    svg << "<line class=\"zero\" x1=\"" << x0 + style.margin - 6 << "\" y1=\"" << px(zero_y) << "\" x2=\""
        << x0 + panel_w - style.margin / 2 << "\" y2=\"" << px(zero_y) << "\" stroke=\"black\"/>\n"
        << "</g>\n";
  }
  const int ly = height - 14;
  svg << "<rect x=\"10\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"#1f77b4\"/>"
      << "<text x=\"24\" y=\"" << ly << "\">+gap</text>\n"
      << "<rect x=\"70\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"#ff7f0e\"/>"
      << "<text x=\"84\" y=\"" << ly << "\">-gap</text>\n"
      << "</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------

std::string render_report(const ReportBundle& bundle, const std::vector<std::string>& chart_files) {
  std::map<std::tuple<std::string, Construction, std::string>, std::string> verdict;
  for (const auto& v : bundle.verdicts) verdict[{v.model_id, v.construction, v.criterion}] = v.verdict;

  std::ostringstream md;
  md << "# Filler-gap evaluation report\n\n";
  if (!bundle.metadata.empty()) {
    md << "## Run\n\n```json\n" << bundle.metadata.dump(2) << "\n```\n\n";
  }

  md << "## Verdicts\n\n"
     << "| Model | Construction | Simple pattern | Licensing | Island (stringent) | Island (relative) | "
        "Island 3-way | FGE | UGE |\n"
     << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& model : bundle.model_ids) {
    for (Construction c : bundle.constructions) {
      md << "| " << model << " | " << to_string(c);
      for (const auto& crit : criteria()) {
        const auto it = verdict.find({model, c, crit});
        md << " | " << (it == verdict.end() ? kNotTested : it->second);
      }
      md << " |\n";
    }
  }
  md << '\n';

  if (!chart_files.empty()) {
    md << "## Charts\n\n";
    for (const auto& f : chart_files) md << "![filler effects](" << f << ")\n\n";
  }

  md << "## Filler effects (bits, mean and 95% CI over items)\n\n"
     << "| Model | Construction | Gap | Island | Mean | CI half-width | n |\n"
     << "|---|---|---|---|---|---|---|\n";
  for (const auto& [model, s] : bundle.summaries) {
    md << "| " << model << " | " << to_string(s.construction) << " | " << sign_char(s.gap) << " | "
       << sign_char(s.island) << " | " << fixed(s.mean, 3) << " | " << fixed(s.half_width, 3) << " | " << s.n
       << " |\n";
  }
  md << '\n';

  md << "## Regression fits\n\n";
  for (const auto& f : bundle.fits) {
    md << "### " << f.model_id << " / " << to_string(f.construction) << " / " << f.analysis << "\n\n"
       << "sigma_item " << fixed(std::sqrt(f.fit.sigma2_item), 3) << ", sigma_resid "
       << fixed(std::sqrt(f.fit.sigma2_resid), 3) << (f.fit.converged ? "" : ", **did not converge**") << "\n\n"
       << "| Term | Estimate | SE | t | p |\n|---|---|---|---|---|\n";
    for (const auto& t : f.fit.terms) {
      char p[32];
      std::snprintf(p, sizeof p, "%.3g", t.p);
      md << "| " << t.term << " | " << fixed(t.estimate, 3) << " | " << fixed(t.se, 3) << " | " << fixed(t.t, 3)
         << " | " << p << " |\n";
    }
    md << '\n';
  }
  return md.str();
}

}  // namespace gaplab::report
