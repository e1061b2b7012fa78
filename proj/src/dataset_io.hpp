#pragma once

#include <optional>
#include <string>
#include <vector>

#include "event_paths.hpp"

namespace ctmsm {

struct Dataset {
  std::vector<Trajectory> subjects;
  std::optional<double> t_R;  // from the header line when present
  std::string world;          // "observational", "experimental" or empty
};

// JSON Lines. An optional first line {"ctmsm_dataset": 1, "t_R": .., "world": ..}
// is followed by one object per subject:
//   {"id", "z", "u" (int or null), "t_max", "terminated", "y",
//    "a_jumps": [[t, dose], ...], "l_obs": [[t, l], ...]}
// Doubles are written with 17 significant digits.
std::string dataset_to_jsonl(const std::vector<Trajectory>& data, std::optional<double> t_R = std::nullopt,
                             const std::string& world = "");

// Throws Parse with the 1-based line number on malformed content.
Dataset dataset_from_jsonl(const std::string& text);

// Writes through a temporary file and a rename.
void write_text_atomic(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

void write_dataset(const std::string& path, const std::vector<Trajectory>& data,
                   std::optional<double> t_R = std::nullopt, const std::string& world = "");

// Reads and validates. An explicit t_R wins over the header; without either
// the largest t_max in the file is used. Throws Validation listing every
// violation.
Dataset read_dataset(const std::string& path, std::optional<double> t_R = std::nullopt);

}  // namespace ctmsm
