#include "erta/cli.hpp"

int main(int argc, char** argv) {
    return erta::cli::run(argc, argv);
}
