#pragma once

#include <filesystem>

namespace pcig {

// $PCIG_DATA_DIR, else the source tree's data/ directory.
std::filesystem::path data_dir();
// $PCIG_TEMPLATE_DIR, else the source tree's templates/ directory.
std::filesystem::path template_dir();

}  // namespace pcig
