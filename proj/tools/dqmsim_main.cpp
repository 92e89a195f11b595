#include "dqm/scenario.hpp"

int main(int argc, char** argv) { return dqm::cli_main(argc, argv); }
