#pragma once

#include <cstdint>
#include <string>

namespace iit::cli {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  int workers = 1;
  std::uint64_t cap = 4096;
};

int cmd_sample(const GlobalOptions& options);
int cmd_exact(const GlobalOptions& options);
int cmd_experiment(const GlobalOptions& options);

}  // namespace iit::cli
