#include "oscid/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "oscid/errors.hpp"

namespace oscid {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t column_of(std::string_view line, std::string_view part) {
  return static_cast<std::size_t>(part.data() - line.data()) + 1;
}

std::optional<int> unit_exponent(std::string_view tag, Dimension dim) {
  if (dim == Dimension::frequency) {
    if (tag == "Hz") return 0;
    if (tag == "kHz") return 3;
    if (tag == "MHz") return 6;
    if (tag == "GHz") return 9;
  } else {
    if (tag == "V") return 0;
    if (tag == "mV") return -3;
    if (tag == "uV") return -6;
    if (tag == "nV") return -9;
  }
  return std::nullopt;
}

std::optional<double> to_double(std::string_view text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

// Decimal shift by 10^exp10 folded into the text, so "6.94016" MHz becomes
// the correctly rounded 6940160.
std::optional<double> to_double_scaled(std::string_view text, int exp10) {
  if (exp10 == 0) return to_double(text);
  std::string mantissa(text);
  long exponent = 0;
  if (const auto e = mantissa.find_first_of("eE"); e != std::string::npos) {
    const std::string_view tail = std::string_view(mantissa).substr(e + 1);
    auto [ptr, ec] = std::from_chars(tail.data() + (tail.starts_with('+') ? 1 : 0),
                                     tail.data() + tail.size(), exponent);
    if (ec != std::errc() || ptr != tail.data() + tail.size()) return std::nullopt;
    mantissa.resize(e);
  }
  return to_double(mantissa + "e" + std::to_string(exponent + exp10));
}

}  // namespace

std::optional<double> unit_scale(std::string_view tag, Dimension dim) {
  const auto e = unit_exponent(tag, dim);
  if (!e) return std::nullopt;
  return *to_double_scaled("1", *e);
}

const KvCell* KvSection::find(std::string_view key) const {
  for (const auto& [k, v] : entries)
    if (k.text == key) return &v;
  return nullptr;
}

KeyValueFile KeyValueFile::parse(std::istream& in, std::string filename) {
  KeyValueFile file;
  file.filename_ = std::move(filename);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line(raw);
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#' || body.front() == ';') continue;

    if (body.front() == '[') {
      if (body.back() != ']')
        throw SchemaError(file.filename_, line_no, column_of(line, body),
                          "unterminated section header");
      KvSection s;
      s.name = std::string(trim(body.substr(1, body.size() - 2)));
      s.line = line_no;
      for (const auto& other : file.sections_)
        if (other.name == s.name)
          throw SchemaError(file.filename_, line_no, column_of(line, body),
                            "duplicate section [" + s.name + "]");
      file.sections_.push_back(std::move(s));
      continue;
    }
    if (file.sections_.empty())
      throw SchemaError(file.filename_, line_no, column_of(line, body),
                        "content before the first section header");
    KvSection& s = file.sections_.back();

    if (const auto eq = body.find('='); eq != std::string_view::npos) {
      const std::string_view key = trim(body.substr(0, eq));
      const std::string_view value = trim(body.substr(eq + 1));
      if (key.empty())
        throw SchemaError(file.filename_, line_no, column_of(line, body), "empty key");
      if (s.find(key))
        throw SchemaError(file.filename_, line_no, column_of(line, key),
                          "duplicate key '" + std::string(key) + "'");
      s.entries.push_back(
          {{std::string(key), line_no, column_of(line, key)},
           {std::string(value), line_no,
            value.empty() ? column_of(line, body) + eq + 1 : column_of(line, value)}});
      continue;
    }

    std::vector<KvCell> row;
    std::string_view rest = body;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view cell = trim(rest.substr(0, comma));
      row.push_back({std::string(cell), line_no,
                     cell.empty() ? column_of(line, rest) : column_of(line, cell)});
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    s.rows.push_back(std::move(row));
  }
  return file;
}

KeyValueFile KeyValueFile::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), 0, 0, "cannot open file");
  return parse(in, path.string());
}

const KvSection* KeyValueFile::section(std::string_view name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

const KvSection& KeyValueFile::require(std::string_view name) const {
  if (const auto* s = section(name)) return *s;
  throw SchemaError(filename_, 0, 0, "missing section [" + std::string(name) + "]");
}

void KeyValueFile::fail(const KvCell& at, const std::string& what) const {
  throw SchemaError(filename_, at.line, at.column, what);
}

void KeyValueFile::fail(const KvSection& at, const std::string& what) const {
  throw SchemaError(filename_, at.line, 1, "[" + at.name + "] " + what);
}

double KeyValueFile::parse_number(const KvCell& cell) const {
  if (auto v = to_double(cell.text)) return *v;
  fail(cell, "expected a number, got '" + cell.text + "'");
}

double KeyValueFile::parse_quantity(const KvCell& cell, std::string_view unit,
                                    Dimension dim) const {
  const auto e = unit_exponent(unit, dim);
  if (!e) {
    std::ostringstream msg;
    msg << filename_ << ":" << cell.line << ":" << cell.column << ": unrecognized unit tag '"
        << unit << "'";
    throw UnitError(msg.str());
  }
  if (auto v = to_double_scaled(cell.text, *e)) return *v;
  fail(cell, "expected a number, got '" + cell.text + "'");
}

std::optional<double> KeyValueFile::find_number(const KvSection& s,
                                                std::string_view key) const {
  const KvCell* c = s.find(key);
  if (!c) return std::nullopt;
  return parse_number(*c);
}

double KeyValueFile::number(const KvSection& s, std::string_view key) const {
  if (auto v = find_number(s, key)) return *v;
  fail(s, "missing key '" + std::string(key) + "'");
}

std::optional<std::string> KeyValueFile::find_text(const KvSection& s,
                                                   std::string_view key) const {
  const KvCell* c = s.find(key);
  if (!c) return std::nullopt;
  return c->text;
}

std::string KeyValueFile::text(const KvSection& s, std::string_view key) const {
  if (auto v = find_text(s, key)) return *v;
  fail(s, "missing key '" + std::string(key) + "'");
}

std::optional<double> KeyValueFile::find_quantity(const KvSection& s,
                                                  std::string_view base,
                                                  Dimension dim) const {
  std::optional<double> found;
  for (const auto& [key, value] : s.entries) {
    const std::string_view k(key.text);
    if (k.size() <= base.size() + 1 || !k.starts_with(base) || k[base.size()] != '_')
      continue;
    const std::string_view tag = k.substr(base.size() + 1);
    if (tag.find('_') != std::string_view::npos) continue;  // a different key
    const auto e = unit_exponent(tag, dim);
    if (!e) {
      std::ostringstream msg;
      msg << filename_ << ":" << key.line << ":" << key.column
          << ": unrecognized unit tag '" << tag << "' in key '" << k << "'";
      throw UnitError(msg.str());
    }
    if (found) fail(key, "quantity '" + std::string(base) + "' given twice");
    const auto v = to_double_scaled(value.text, *e);
    if (!v) fail(value, "expected a number, got '" + value.text + "'");
    found = *v;
  }
  return found;
}

double KeyValueFile::quantity(const KvSection& s, std::string_view base,
                              Dimension dim) const {
  if (auto v = find_quantity(s, base, dim)) return *v;
  fail(s, "missing quantity '" + std::string(base) + "_<unit>'");
}

}  // namespace oscid
