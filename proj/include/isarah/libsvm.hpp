#pragma once

#include "isarah/problems.hpp"

#include <filesystem>
#include <istream>

namespace isarah {

/// Parses LIBSVM text: one `label idx:val idx:val ...` row per line with 1-based,
/// strictly increasing indices. Blank lines and lines starting with '#' are skipped.
///
/// Labels already in {-1, +1} are kept; any other pair of distinct values is mapped
/// smaller -> -1, larger -> +1.
///
/// Throws ParseError (with the 1-based line number) on malformed rows and DataError
/// when there are no rows or the labels are not binary.
LabeledDataset parse_libsvm(std::istream& in);
LabeledDataset read_libsvm(const std::filesystem::path& path);

LogisticProblem load_libsvm(const std::filesystem::path& path, double lambda);

}  // namespace isarah
