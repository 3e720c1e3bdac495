#include "nmtune/io/labels.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

#include "nmtune/error.hpp"
#include "nmtune/io/fmat.hpp"

namespace nmtune::io {

namespace {

template <typename T>
T parse_int(std::string_view s, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::kLabelError,
         "line " + std::to_string(line_no) + ": not an integer: '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

std::size_t LabelFile::classes() const {
  if (num_classes) return *num_classes;
  if (labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

LabelFile parse_labels(const std::string& text) {
  LabelFile out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view key = "# classes=";
      if (line_no != 1 || line.substr(0, key.size()) != key) {
        fail(ErrorKind::kLabelError, "line " + std::to_string(line_no) + ": unexpected comment");
      }
      out.num_classes = parse_int<std::size_t>(line.substr(key.size()), line_no);
      continue;
    }
    out.labels.push_back(parse_int<Label>(line, line_no));
  }
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const Label l = out.labels[i];
    if (l < 0 || (out.num_classes && static_cast<std::size_t>(l) >= *out.num_classes)) {
      fail(ErrorKind::kLabelError, "label " + std::to_string(l) + " at index " + std::to_string(i) +
                                       " is out of range");
    }
  }
  return out;
}

std::string format_labels(const LabelFile& file) {
  std::string out;
  if (file.num_classes) out += "# classes=" + std::to_string(*file.num_classes) + "\n";
  for (Label l : file.labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

LabelFile read_labels(const std::filesystem::path& path) { return parse_labels(read_file(path)); }

void write_labels(const LabelFile& file, const std::filesystem::path& path) {
  write_file_atomic(path, format_labels(file));
}

}  // namespace nmtune::io
