#ifndef OSCID_KEYVALUE_HPP
#define OSCID_KEYVALUE_HPP

// Sectioned key-value text files:
//
//   # comment
//   [section]
//   key = value
//   1, 6.94016, 6.94036      <- row (comma separated cells)
//
// Keys carrying a physical quantity end in a unit tag (eta_plus_start_MHz,
// noise_floor_uV); lookups convert to Hz or V.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oscid {

struct KvCell {
  std::string text;
  std::size_t line;
  std::size_t column;
};

struct KvSection {
  std::string name;
  std::size_t line = 0;
  std::vector<std::pair<KvCell, KvCell>> entries;  // key, value
  std::vector<std::vector<KvCell>> rows;

  const KvCell* find(std::string_view key) const;
};

enum class Dimension { frequency, voltage };

class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, std::string filename);
  static KeyValueFile read(const std::filesystem::path& path);

  const std::string& filename() const { return filename_; }
  const KvSection* section(std::string_view name) const;
  const KvSection& require(std::string_view name) const;

  double number(const KvSection& s, std::string_view key) const;
  std::optional<double> find_number(const KvSection& s, std::string_view key) const;
  std::string text(const KvSection& s, std::string_view key) const;
  std::optional<std::string> find_text(const KvSection& s, std::string_view key) const;

  /// Value of `<base>_<unit>` converted to Hz or V.
  double quantity(const KvSection& s, std::string_view base, Dimension dim) const;
  std::optional<double> find_quantity(const KvSection& s, std::string_view base,
                                      Dimension dim) const;

  double parse_number(const KvCell& cell) const;
  /// Cell value in `unit` converted to SI by a decimal exponent shift, so
  /// "6.94016" in MHz reads as exactly 6940160.
  double parse_quantity(const KvCell& cell, std::string_view unit, Dimension dim) const;

  [[noreturn]] void fail(const KvCell& at, const std::string& what) const;
  [[noreturn]] void fail(const KvSection& at, const std::string& what) const;

 private:
  std::string filename_;
  std::vector<KvSection> sections_;
};

/// Multiplier to SI for a unit tag, or nullopt if the tag is unknown.
std::optional<double> unit_scale(std::string_view tag, Dimension dim);

}  // namespace oscid

#endif  // OSCID_KEYVALUE_HPP
