#pragma once

// Subject records for the completed trial (Study A, fully observed) and the
// follow-up trial (Study B, where each subject carries either the surrogate
// or the outcome according to the measurement indicator delta).
//
// CSV layouts:
//   Study A   arm,w,s,y        every field required
//   Study B   arm,w,delta,s,y  s empty iff delta = 0, y empty iff delta = 1
// An empty field (two adjacent commas) is an absent value.

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace etsi {

enum class Role { A, B };

std::string_view role_name(Role role);

struct Subject {
  int arm = 0;  // treatment indicator G, 0 or 1
  double w = 0.0;
  std::optional<double> s;
  std::optional<double> y;
  std::optional<int> delta;
};

/// Immutable, validated collection of subjects. Row order is preserved.
class Study {
public:
  /// Validates every subject against the role's schema and requires at
  /// least two subjects per arm. Throws ValidationError.
  static Study create(Role role, std::vector<Subject> subjects);

  Role role() const { return role_; }
  std::span<const Subject> subjects() const { return subjects_; }
  std::size_t size() const { return subjects_.size(); }
  std::size_t arm_count(int arm) const { return arm_counts_[static_cast<std::size_t>(arm)]; }

  /// True when every subject carries an outcome / a surrogate.
  bool has_full_outcome() const;
  bool has_full_surrogate() const;

private:
  Study(Role role, std::vector<Subject> subjects);

  Role role_;
  std::vector<Subject> subjects_;
  std::array<std::size_t, 2> arm_counts_{};
};

/// Column layout expected for a role.
std::span<const std::string_view> schema_columns(Role role);

Study parse_study(std::istream& in, Role role, std::string_view source = "<stream>");
Study load_study(const std::filesystem::path& path, Role role);

/// Peeks at the header line and reports which role's layout it matches, if
/// any. Throws DataError if the file cannot be read.
std::optional<Role> detect_role(const std::filesystem::path& path);

void write_study(const Study& study, std::ostream& out);
void write_study(const Study& study, const std::filesystem::path& path);

/// Shortest round-trip decimal form, used by every CSV writer.
std::string format_number(double value);

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct ArmSummary {
  std::size_t n = 0;
  // Stratum counts and the surrogate-only fraction. For Study B these
  // follow delta; for Study A they need a region predicate.
  std::optional<std::size_t> n_outside;  // n_gC
  std::optional<std::size_t> n_inside;   // n_gW
  std::optional<double> pi_hat;          // n_gW / n_g
};

struct StudySummary {
  Role role = Role::A;
  std::array<ArmSummary, 2> arms;
  Range w;
  std::optional<Range> s;  // over present values only
  std::optional<Range> y;
};

using RegionPredicate = std::function<bool(double)>;

/// Per-arm counts and observed ranges. A role-B study is stratified by
/// delta; a role-A study is stratified only when `in_region` is supplied.
StudySummary summarize(const Study& study, const RegionPredicate& in_region = {});

}  // namespace etsi
