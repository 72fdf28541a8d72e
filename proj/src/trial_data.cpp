#include "etsi/trial_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "etsi/errors.hpp"

namespace etsi {

namespace {

constexpr std::array<std::string_view, 4> kColumnsA{"arm", "w", "s", "y"};
constexpr std::array<std::string_view, 5> kColumnsB{"arm", "w", "delta", "s", "y"};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::string where(std::string_view source, std::size_t line_no) {
  return std::string(source) + ": line " + std::to_string(line_no);
}

std::optional<double> parse_field(std::string_view field, std::string_view column,
                                  std::string_view source, std::size_t line_no) {
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;  // from_chars rejects a leading plus
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError(where(source, line_no) + ", column '" + std::string(column) +
                     "': cannot parse '" + std::string(field) + "' as a finite number");
  }
  return value;
}

void check_header(std::string_view header, Role role, std::string_view source) {
  const auto expected = schema_columns(role);
  const auto got = split_fields(header);
  for (std::string_view col : expected) {
    if (std::find(got.begin(), got.end(), col) == got.end()) {
      throw SchemaError(std::string(source) + ": missing column '" + std::string(col) +
                        "' for a Study " + std::string(role_name(role)) + " file");
    }
  }
  for (std::string_view col : got) {
    if (std::find(expected.begin(), expected.end(), col) == expected.end()) {
      throw SchemaError(std::string(source) + ": unexpected column '" + std::string(col) +
                        "' for a Study " + std::string(role_name(role)) + " file");
    }
  }
  if (!std::equal(got.begin(), got.end(), expected.begin(), expected.end())) {
    std::string want;
    for (std::string_view col : expected) want += (want.empty() ? "" : ",") + std::string(col);
    throw SchemaError(std::string(source) + ": columns out of order, expected '" + want + "'");
  }
}

int as_indicator(double v, std::string_view what, const std::string& loc) {
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw ValidationError(loc + ": " + std::string(what) + " must be 0 or 1");
}

// Returns an empty string when the subject is valid for the role.
std::string subject_problem(const Subject& s, Role role) {
  if (s.arm != 0 && s.arm != 1) return "arm must be 0 or 1";
  if (!std::isfinite(s.w)) return "w must be finite";
  if (s.s && !std::isfinite(*s.s)) return "s must be finite";
  if (s.y && !std::isfinite(*s.y)) return "y must be finite";
  if (role == Role::A) {
    if (s.delta) return "delta is not part of the Study A schema";
    if (!s.s) return "s is required in Study A";
    if (!s.y) return "y is required in Study A";
    return {};
  }
  if (!s.delta) return "delta is required in Study B";
  if (*s.delta == 1) {
    if (!s.s) return "delta=1 requires s";
    if (s.y) return "delta=1 requires y to be empty";
  } else if (*s.delta == 0) {
    if (!s.y) return "delta=0 requires y";
    if (s.s) return "delta=0 requires s to be empty";
  } else {
    return "delta must be 0 or 1";
  }
  return {};
}

}  // namespace

std::string_view role_name(Role role) { return role == Role::A ? "A" : "B"; }

std::span<const std::string_view> schema_columns(Role role) {
  if (role == Role::A) return kColumnsA;
  return kColumnsB;
}

Study::Study(Role role, std::vector<Subject> subjects)
    : role_(role), subjects_(std::move(subjects)) {
  for (const Subject& s : subjects_) ++arm_counts_[static_cast<std::size_t>(s.arm)];
}

Study Study::create(Role role, std::vector<Subject> subjects) {
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const std::string problem = subject_problem(subjects[i], role);
    if (!problem.empty()) {
      throw ValidationError("subject " + std::to_string(i + 1) + ": " + problem);
    }
  }
  Study study(role, std::move(subjects));
  for (int arm : {0, 1}) {
    if (study.arm_count(arm) < 2) {
      throw ValidationError("arm " + std::to_string(arm) + " has " +
                            std::to_string(study.arm_count(arm)) +
                            " subjects; at least 2 are required");
    }
  }
  return study;
}

bool Study::has_full_outcome() const {
  return std::all_of(subjects_.begin(), subjects_.end(),
                     [](const Subject& s) { return s.y.has_value(); });
}

bool Study::has_full_surrogate() const {
  return std::all_of(subjects_.begin(), subjects_.end(),
                     [](const Subject& s) { return s.s.has_value(); });
}

Study parse_study(std::istream& in, Role role, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError(std::string(source) + ": empty file, no header");
  }
  std::string_view header = strip_cr(line);
  if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  check_header(header, role, source);

  const auto columns = schema_columns(role);
  std::vector<Subject> subjects;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip_cr(line);
    if (row.empty()) continue;
    const auto fields = split_fields(row);
    if (fields.size() != columns.size()) {
      throw ParseError(where(source, line_no) + ": expected " + std::to_string(columns.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    const std::string loc = where(source, line_no);
    std::array<std::optional<double>, 5> v;
    for (std::size_t c = 0; c < std::min(fields.size(), v.size()); ++c) {
      v[c] = parse_field(fields[c], columns[c], source, line_no);
    }
    Subject s;
    if (!v[0]) throw ValidationError(loc + ": arm is required");
    if (!v[1]) throw ValidationError(loc + ": w is required");
    s.arm = as_indicator(*v[0], "arm", loc);
    s.w = *v[1];
    if (role == Role::A) {
      s.s = v[2];
      s.y = v[3];
    } else {
      if (!v[2]) throw ValidationError(loc + ": delta is required");
      s.delta = as_indicator(*v[2], "delta", loc);
      s.s = v[3];
      s.y = v[4];
    }
    const std::string problem = subject_problem(s, role);
    if (!problem.empty()) throw ValidationError(loc + ": " + problem);
    subjects.push_back(s);
  }
  try {
    return Study::create(role, std::move(subjects));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(source) + ": " + e.what());
  }
}

Study load_study(const std::filesystem::path& path, Role role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_study(in, role, path.string());
}

std::optional<Role> detect_role(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  std::string_view header = strip_cr(line);
  if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  const auto fields = split_fields(header);
  for (Role role : {Role::A, Role::B}) {
    const auto cols = schema_columns(role);
    if (std::equal(fields.begin(), fields.end(), cols.begin(), cols.end())) return role;
  }
  return std::nullopt;
}

std::string format_number(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

void write_study(const Study& study, std::ostream& out) {
  const auto cols = schema_columns(study.role());
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const Subject& s : study.subjects()) {
    out << s.arm << ',' << format_number(s.w) << ',';
    if (study.role() == Role::B) out << *s.delta << ',';
    out << opt(s.s) << ',' << opt(s.y) << '\n';
  }
}

void write_study(const Study& study, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_study(study, out);
}

StudySummary summarize(const Study& study, const RegionPredicate& in_region) {
  StudySummary summary;
  summary.role = study.role();
  const bool stratified = study.role() == Role::B || static_cast<bool>(in_region);

  std::array<std::size_t, 2> inside{};
  auto widen = [](std::optional<Range>& r, double v) {
    if (!r) {
      r = Range{v, v};
    } else {
      r->min = std::min(r->min, v);
      r->max = std::max(r->max, v);
    }
  };
  std::optional<Range> w_range;
  for (const Subject& s : study.subjects()) {
    const auto g = static_cast<std::size_t>(s.arm);
    ++summary.arms[g].n;
    widen(w_range, s.w);
    if (s.s) widen(summary.s, *s.s);
    if (s.y) widen(summary.y, *s.y);
    if (stratified) {
      const bool in = study.role() == Role::B ? (*s.delta == 1) : in_region(s.w);
      if (in) ++inside[g];
    }
  }
  for (std::size_t g = 0; g < 2; ++g) {
    ArmSummary& arm = summary.arms[g];
    if (arm.n == 0) throw ValidationError("arm " + std::to_string(g) + " is empty");
    if (stratified) {
      arm.n_inside = inside[g];
      arm.n_outside = arm.n - inside[g];
      arm.pi_hat = static_cast<double>(inside[g]) / static_cast<double>(arm.n);
    }
  }
  summary.w = *w_range;
  return summary;
}

}  // namespace etsi
