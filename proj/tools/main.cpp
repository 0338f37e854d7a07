#include "ranet/cli.hpp"

int main(int argc, char** argv) { return ranet::cli::run(argc, argv); }
