#include "ebip/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "ebip/error.hpp"

namespace ebip {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw data_error("format", "cannot format number");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r' || text.back() == '\t'))
    text.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw data_error("parse", "not a number: '" + std::string(text) + "'");
  }
  return value;
}

nlohmann::json layout_to_json(const ModalityLayout& layout) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : layout.modalities()) {
    arr.push_back({{"name", m.name}, {"dofs", m.dof_count}, {"role", to_string(m.role)}});
  }
  return arr;
}

ModalityLayout layout_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw config_error("bad_layout", "layout must be a JSON array");
  std::vector<Modality> mods;
  for (const auto& item : j) {
    mods.push_back({item.at("name").get<std::string>(), item.at("dofs").get<int>(),
                    role_from_string(item.at("role").get<std::string>())});
  }
  return ModalityLayout(std::move(mods));
}

void write_demonstration(std::ostream& out, const Demonstration& demo) {
  nlohmann::json header{{"layout", layout_to_json(demo.layout)},
                        {"sample_rate", demo.sample_rate},
                        {"T", demo.duration()},
                        {"D", demo.dofs()}};
  out << header.dump() << '\n';
  std::string line;
  for (Eigen::Index t = 0; t < demo.samples.cols(); ++t) {
    line.clear();
    for (Eigen::Index d = 0; d < demo.samples.rows(); ++d) {
      if (d) line += ',';
      line += format_double(demo.samples(d, t));
    }
    out << line << '\n';
  }
}

Demonstration read_demonstration(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw data_error("bad_demo", "missing demonstration header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad_demo", std::string("malformed header: ") + e.what());
  }
  Demonstration demo;
  demo.layout = layout_from_json(header.at("layout"));
  demo.sample_rate = header.at("sample_rate").get<double>();
  const int t_count = header.at("T").get<int>();
  const int d_count = demo.layout.total_dofs();
  if (header.contains("D") && header.at("D").get<int>() != d_count) {
    throw data_error("bad_demo", "header D disagrees with layout");
  }
  demo.samples.resize(d_count, t_count);
  for (int t = 0; t < t_count; ++t) {
    if (!std::getline(in, line)) {
      throw data_error("bad_demo", "expected " + std::to_string(t_count) + " rows, got " +
                                       std::to_string(t));
    }
    std::string_view rest(line);
    for (int d = 0; d < d_count; ++d) {
      const auto comma = rest.find(',');
      const bool last = d + 1 == d_count;
      if (last != (comma == std::string_view::npos)) {
        throw data_error("bad_demo", "row " + std::to_string(t) + " does not have " +
                                         std::to_string(d_count) + " columns");
      }
      demo.samples(d, t) = parse_double(rest.substr(0, comma));
      if (!last) rest.remove_prefix(comma + 1);
    }
  }
  demo.validate();
  return demo;
}

void save_demonstration(const std::filesystem::path& path, const Demonstration& demo) {
  std::ostringstream os;
  write_demonstration(os, demo);
  write_text_file(path, os.str());
}

Demonstration load_demonstration(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("io", "cannot open " + path.string());
  return read_demonstration(in);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("io", "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("io", "cannot write " + path.string());
  out << text;
  if (!out) throw data_error("io", "write failed for " + path.string());
}

nlohmann::json load_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw config_error("bad_json", path.string() + ": " + e.what());
  }
}

}  // namespace ebip
