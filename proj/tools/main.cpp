#include "bliss/harness.hpp"

int main(int argc, char** argv) { return bliss::cli(argc, argv); }
