#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ebip/core.hpp"

namespace ebip {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text);

nlohmann::json layout_to_json(const ModalityLayout& layout);
ModalityLayout layout_from_json(const nlohmann::json& j);

/// Demonstration file: one line of JSON header ({"layout", "sample_rate",
/// "T", "D"}) followed by T CSV rows of D values in layout order.
void write_demonstration(std::ostream& out, const Demonstration& demo);
Demonstration read_demonstration(std::istream& in);
void save_demonstration(const std::filesystem::path& path, const Demonstration& demo);
Demonstration load_demonstration(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace ebip
