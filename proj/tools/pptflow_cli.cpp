#include "pptflow/cli.hpp"

int main(int argc, char** argv) { return pptflow::cli::run(argc, argv); }
