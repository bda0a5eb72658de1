#pragma once

#include <filesystem>
#include <iosfwd>

#include "blaircomp/ensemble.hpp"

namespace blaircomp {

// Little-endian binary dump of a full instance (design, truth, measurements, flips).
void write_instance(std::ostream& out, const ProblemInstance& inst);
ProblemInstance read_instance(std::istream& in);

void save_instance(const std::filesystem::path& path, const ProblemInstance& inst);
ProblemInstance load_instance(const std::filesystem::path& path);

}  // namespace blaircomp
