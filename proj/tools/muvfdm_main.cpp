#include <muvfdm/cli.hpp>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return muvfdm::cli_main(std::move(args));
}
