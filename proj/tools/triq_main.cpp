#include "triq/cli.hpp"

int main(int argc, char** argv) { return triq::run_cli(argc, argv); }
