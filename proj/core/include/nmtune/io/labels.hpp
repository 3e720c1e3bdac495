#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nmtune/dataset.hpp"

namespace nmtune::io {

/// One decimal label per line, with an optional "# classes=C" first line.
struct LabelFile {
  std::vector<Label> labels;
  std::optional<std::size_t> num_classes;

  /// Header value if present, otherwise max label + 1.
  std::size_t classes() const;
};

LabelFile parse_labels(const std::string& text);
std::string format_labels(const LabelFile& file);

LabelFile read_labels(const std::filesystem::path& path);
void write_labels(const LabelFile& file, const std::filesystem::path& path);

}  // namespace nmtune::io
