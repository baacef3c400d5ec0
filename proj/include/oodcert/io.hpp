#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace oodcert {

// Formats a finite double with 17 significant digits so it round-trips
// exactly. Throws InternalError on NaN or infinity.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Parses JSON text, mapping syntax errors to FormatError.
nlohmann::json parse_json(std::string_view text, std::string_view what);

// Fetches a required member of `object`; FormatError names `field` when it is
// missing or has the wrong type.
const nlohmann::json& require_field(const nlohmann::json& object,
                                    std::string_view field);
double require_number(const nlohmann::json& object, std::string_view field);
std::int64_t require_integer(const nlohmann::json& object,
                             std::string_view field);
std::string require_string(const nlohmann::json& object, std::string_view field);
std::vector<double> require_number_array(const nlohmann::json& object,
                                         std::string_view field);

// Minimal streaming JSON writer. nlohmann prints the shortest round-trip
// representation of a double; the interchange formats require 17 significant
// digits, so documents are emitted through this writer instead.
class JsonWriter
{
public:
  explicit JsonWriter(bool pretty = true) : pretty_(pretty) {}

  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);

  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();

  template <typename Range>
  JsonWriter& array(const Range& values)
  {
    begin_array();
    for (const auto& v : values)
      value(v);
    return end_array();
  }

  // Returns the document, terminated by a newline.
  std::string str() const;

private:
  struct Frame
  {
    bool is_object;
    bool empty = true;
  };

  void before_value();
  void newline();

  std::string out_;
  std::vector<Frame> stack_;
  bool pretty_;
  bool after_key_ = false;
};

std::string escape_json(std::string_view text);

} // namespace oodcert
