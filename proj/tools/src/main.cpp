#include "mvcli/cli.hpp"

int main(int argc, char** argv) { return mvcli::run_cli(argc, argv); }
