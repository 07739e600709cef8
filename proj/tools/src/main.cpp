#include <iostream>

#include "cloudlstm_app/commands.hpp"

int main(int argc, char** argv) { return cloudlstm::app::run_cli(argc, argv, std::cout, std::cerr); }
