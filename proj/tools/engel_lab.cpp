#include "engel_lab/cli.hpp"

int main(int argc, char** argv) { return engel_lab::cli::run(argc, argv); }
