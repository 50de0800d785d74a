#include "confreg/cli.hpp"

int main(int argc, char** argv)
{
    return confreg::cli::run(argc, argv);
}
