#include <thbez/cli/commands.hpp>

#include <iostream>

int main( int argc, char** argv )
{
    return thbez::cli::run_cli( argc, argv, std::cout, std::cerr );
}
