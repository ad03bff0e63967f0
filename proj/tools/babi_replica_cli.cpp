// babi-replica: writes stand-in task 1 / task 4 files in the bAbI v1.2 layout.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "babi_replica.hpp"
#include "dmtn/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate replica bAbI task files"};
  std::string root;
  std::vector<int> tasks{1, 4};
  std::uint64_t seed = 2016;
  app.add_option("--out", root, "output root (files go to <out>/en/)")->required();
  app.add_option("--task", tasks, "tasks to write (1 and/or 4)");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);
  try {
    for (int t : tasks) {
      dmtn::replica::write_replica(root, t, seed);
      std::printf("wrote task %d under %s/en\n", t, root.c_str());
    }
  } catch (const dmtn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
