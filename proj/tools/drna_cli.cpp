#include "drna/cli_app.hpp"

int main(int argc, char** argv) { return drna::cli::run(argc, argv); }
