#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace moecap::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kValidation = 2 };

// Shipped data directory (models, catalog, rules). MOECAP_DATA_DIR in the
// environment overrides the compiled-in location.
std::filesystem::path data_dir();

// Catalog used when --catalog is absent: $MOECAP_CATALOG, else the shipped
// default catalog.
std::filesystem::path default_catalog_path();

// Runs one invocation; `args` excludes the program name. Reports go to `out`
// (or the files named by --output/--csv), errors to `err` as a JSON document.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace moecap::cli
