#include "neuralign/cli/commands.hpp"

int main(int argc, char** argv) { return neuralign::cli::run(argc, argv); }
