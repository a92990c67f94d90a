#include "weakline/cli_app.hpp"

int main(int argc, char** argv) { return weakline::cli::main_entry(argc, argv); }
