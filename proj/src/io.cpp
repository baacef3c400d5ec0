#include "oodcert/io.hpp"

#include "oodcert/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace oodcert {

std::string format_double(double value)
{
  if (!std::isfinite(value))
    throw InternalError("attempt to serialize a non-finite number");
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string read_text_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    throw IoError("short write to " + path.string());
}

nlohmann::json parse_json(std::string_view text, std::string_view what)
{
  try {
    return nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

const nlohmann::json& require_field(const nlohmann::json& object,
                                    std::string_view field)
{
  if (!object.is_object())
    throw FormatError("expected a JSON object");
  const auto it = object.find(std::string(field));
  if (it == object.end())
    throw FormatError("missing field '" + std::string(field) + "'");
  return *it;
}

double require_number(const nlohmann::json& object, std::string_view field)
{
  const auto& v = require_field(object, field);
  if (!v.is_number())
    throw FormatError("field '" + std::string(field) + "' must be a number");
  return v.get<double>();
}

std::int64_t require_integer(const nlohmann::json& object,
                             std::string_view field)
{
  const auto& v = require_field(object, field);
  if (!v.is_number_integer())
    throw FormatError("field '" + std::string(field) + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string require_string(const nlohmann::json& object, std::string_view field)
{
  const auto& v = require_field(object, field);
  if (!v.is_string())
    throw FormatError("field '" + std::string(field) + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> require_number_array(const nlohmann::json& object,
                                         std::string_view field)
{
  const auto& v = require_field(object, field);
  if (!v.is_array())
    throw FormatError("field '" + std::string(field) + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& item : v) {
    if (!item.is_number())
      throw FormatError("field '" + std::string(field) +
                        "' must contain only numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

std::string escape_json(std::string_view text)
{
  std::string out;
  out.reserve(text.size() + 2);
  for (const char c : text) {
    switch (c) {
    case '"': out += "\\\""; break;
    case '\\': out += "\\\\"; break;
    case '\n': out += "\\n"; break;
    case '\r': out += "\\r"; break;
    case '\t': out += "\\t"; break;
    default:
      if (static_cast<unsigned char>(c) < 0x20) {
        char buffer[8];
        std::snprintf(buffer, sizeof buffer, "\\u%04x", c);
        out += buffer;
      } else {
        out += c;
      }
    }
  }
  return out;
}

void JsonWriter::newline()
{
  out_ += '\n';
  out_.append(2 * stack_.size(), ' ');
}

void JsonWriter::before_value()
{
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (stack_.empty())
    return;
  auto& top = stack_.back();
  if (top.is_object)
    throw InternalError("JsonWriter: object member written without a key");
  if (!top.empty)
    out_ += ", ";
  top.empty = false;
}

JsonWriter& JsonWriter::key(std::string_view name)
{
  if (stack_.empty() || !stack_.back().is_object || after_key_)
    throw InternalError("JsonWriter: key outside of an object");
  auto& top = stack_.back();
  if (!top.empty)
    out_ += ',';
  top.empty = false;
  if (pretty_)
    newline();
  out_ += '"';
  out_ += escape_json(name);
  out_ += pretty_ ? "\": " : "\":";
  after_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::begin_object()
{
  before_value();
  out_ += '{';
  stack_.push_back({true});
  return *this;
}

JsonWriter& JsonWriter::end_object()
{
  const bool empty = stack_.back().empty;
  stack_.pop_back();
  if (pretty_ && !empty)
    newline();
  out_ += '}';
  return *this;
}

JsonWriter& JsonWriter::begin_array()
{
  before_value();
  out_ += '[';
  stack_.push_back({false});
  return *this;
}

JsonWriter& JsonWriter::end_array()
{
  stack_.pop_back();
  out_ += ']';
  return *this;
}

JsonWriter& JsonWriter::value(double v)
{
  before_value();
  out_ += format_double(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v)
{
  before_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v)
{
  before_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v)
{
  before_value();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v)
{
  before_value();
  out_ += '"';
  out_ += escape_json(v);
  out_ += '"';
  return *this;
}

JsonWriter& JsonWriter::null()
{
  before_value();
  out_ += "null";
  return *this;
}

std::string JsonWriter::str() const
{
  if (!stack_.empty())
    throw InternalError("JsonWriter: unterminated document");
  return out_ + '\n';
}

} // namespace oodcert
