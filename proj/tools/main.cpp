#include "commands.hpp"

int main(int argc, char** argv) { return crystalflow::cli::run(argc, argv); }
