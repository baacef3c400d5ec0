#include "oodcert/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
  return oodcert::run_cli(argc, argv, std::cout, std::cerr);
}
