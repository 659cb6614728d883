#include "pemr/cli.hpp"

int main(int argc, char** argv) {
  return pemr::dispatch({argv + 1, argv + argc});
}
