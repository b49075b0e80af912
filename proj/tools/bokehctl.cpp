#include <iostream>

#include "bokeh/cli.hpp"

int main(int argc, char** argv) { return bokeh::cli_dispatch(argc, argv, std::cout, std::cerr); }
