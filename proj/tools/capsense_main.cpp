#include "capsense/cli.hpp"

int main(int argc, char** argv) { return capsense::cli::main_entry(argc, argv); }
