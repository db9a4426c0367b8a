#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "triq/dataio.hpp"
#include "triq/error.hpp"
#include "triq/random.hpp"

namespace triq {
namespace {

const std::array<std::string, 10> kColumns = {"path", "mos", "std", "p1", "p2", "p3", "p4", "p5", "si", "split"};

constexpr double kDistributionSumTol = 1e-3;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(line, "column '" + column + "': not a number: '" + text + "'");
  }
  return value;
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();

  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> column_index;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ParseError(line_no, "missing header");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (std::find(kColumns.begin(), kColumns.end(), header[i]) == kColumns.end()) {
      throw ParseError(line_no, "unknown column '" + header[i] + "'");
    }
    if (!column_index.emplace(header[i], i).second) throw ParseError(line_no, "duplicate column '" + header[i] + "'");
  }
  if (!column_index.count("path") || !column_index.count("mos")) {
    throw ParseError(line_no, "header must contain 'path' and 'mos'");
  }
  const std::size_t dist_columns = static_cast<std::size_t>(std::count_if(
      kColumns.begin() + 3, kColumns.begin() + 8, [&](const std::string& c) { return column_index.count(c) > 0; }));
  if (dist_columns != 0 && dist_columns != kGrades) throw ParseError(line_no, "header needs all of p1..p5 or none");

  Manifest manifest;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    const auto field = [&](const std::string& name) -> std::string {
      const auto it = column_index.find(name);
      return it == column_index.end() ? std::string() : fields[it->second];
    };

    DatasetRecord rec;
    const std::string ref = field("path");
    if (ref.empty()) throw ParseError(line_no, "empty path");
    const std::filesystem::path p(ref);
    rec.image_ref = (p.is_absolute() ? p : base / p).lexically_normal();
    if (!seen.insert(rec.image_ref.string()).second) throw ParseError(line_no, "duplicate image path '" + ref + "'");

    const std::string mos = field("mos");
    if (mos.empty()) throw ParseError(line_no, "empty mos");
    rec.mos = parse_number(mos, line_no, "mos");
    if (rec.mos < 1.0 || rec.mos > 5.0) {
      throw RangeError("line " + std::to_string(line_no) + ": mos " + mos + " outside [1, 5]");
    }

    if (const auto s = field("std"); !s.empty()) {
      rec.score_std = parse_number(s, line_no, "std");
      if (!(*rec.score_std > 0.0)) throw ParseError(line_no, "std must be positive");
    }

    if (dist_columns == kGrades) {
      std::size_t present = 0;
      QualityDistribution d;
      double total = 0.0;
      for (std::size_t g = 0; g < kGrades; ++g) {
        const std::string name = "p" + std::to_string(g + 1);
        const auto s = field(name);
        if (s.empty()) continue;
        ++present;
        d.p[g] = parse_number(s, line_no, name);
        if (d.p[g] < 0.0 || d.p[g] > 1.0) throw ParseError(line_no, name + " outside [0, 1]");
        total += d.p[g];
      }
      if (present != 0 && present != kGrades) throw ParseError(line_no, "p1..p5 must all be given or all empty");
      if (present == kGrades) {
        if (std::abs(total - 1.0) > kDistributionSumTol) {
          throw ParseError(line_no, "p1..p5 sum to " + format_number(total) + ", expected 1");
        }
        for (double& v : d.p) v /= total;
        rec.distribution = d;
      }
    }

    if (const auto s = field("si"); !s.empty()) {
      rec.si = parse_number(s, line_no, "si");
      if (*rec.si < 0.0) throw ParseError(line_no, "si must be non-negative");
    }
    if (const auto s = field("split"); !s.empty()) {
      if (s == "train") {
        rec.split = SplitTag::Train;
      } else if (s == "test") {
        rec.split = SplitTag::Test;
      } else {
        throw ParseError(line_no, "split must be 'train' or 'test', got '" + s + "'");
      }
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kColumns.size(); ++i) os << (i ? "," : "") << kColumns[i];
  os << '\n';
  std::filesystem::path base = path.parent_path();
  if (base.empty()) base = ".";
  for (const DatasetRecord& r : manifest.records) {
    std::filesystem::path ref = r.image_ref;
    std::error_code ec;
    const auto rel = std::filesystem::relative(ref, base, ec);
    if (!ec && !rel.empty()) ref = rel;
    os << csv_escape(ref.generic_string()) << ',' << format_number(r.mos) << ',';
    if (r.score_std) os << format_number(*r.score_std);
    for (std::size_t g = 0; g < kGrades; ++g) {
      os << ',';
      if (r.distribution) os << format_number(r.distribution->p[g]);
    }
    os << ',';
    if (r.si) os << format_number(*r.si);
    os << ',';
    if (r.split) os << (*r.split == SplitTag::Train ? "train" : "test");
    os << '\n';
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << os.str();
  if (!out) throw IoError("failed writing manifest " + path.string());
}

SplitSummary stratified_split(Manifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ParameterError("train fraction must lie in [0, 1]");
  SplitSummary summary;
  auto& records = manifest.records;
  if (records.empty()) return summary;

  std::vector<double> si_values;
  for (const auto& r : records) {
    if (!r.si) throw ContractError("stratified_split: record " + r.image_ref.string() + " has no SI value");
    si_values.push_back(*r.si);
  }
  std::sort(si_values.begin(), si_values.end());
  const std::size_t n = si_values.size();
  summary.si_threshold = n % 2 ? si_values[n / 2] : 0.5 * (si_values[n / 2 - 1] + si_values[n / 2]);

  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    r.stratum = Stratum{*r.si > summary.si_threshold ? SiClass::High : SiClass::Low,
                        static_cast<int>(std::clamp(std::lround(r.mos), 1L, 5L))};
    strata[{static_cast<int>(r.stratum->si_class), r.stratum->mos_class}].push_back(i);
  }

  Rng rng(seed);
  for (int si_class : {0, 1}) {
    for (int grade = 1; grade <= 5; ++grade) {
      auto it = strata.find({si_class, grade});
      if (it == strata.end()) {
        summary.warnings.push_back(std::string("empty stratum: ") + (si_class ? "high" : "low") + " SI, grade " +
                                   std::to_string(grade));
        continue;
      }
      auto& members = it->second;
      std::shuffle(members.begin(), members.end(), rng);
      const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(members.size())));
      for (std::size_t k = 0; k < members.size(); ++k) {
        records[members[k]].split = k < n_train ? SplitTag::Train : SplitTag::Test;
      }
    }
  }
  return summary;
}

std::vector<SplitSummary> stratified_split(std::vector<SplitSource>& sources, std::uint64_t seed) {
  std::vector<SplitSummary> out;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out.push_back(stratified_split(*sources[i].manifest, sources[i].train_fraction,
                                   derive_seed(seed, "split.source" + std::to_string(i))));
  }
  return out;
}

}  // namespace triq
