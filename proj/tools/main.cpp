#include "mcflow/cli.hpp"

int main(int argc, char** argv) {
    return mcflow::cli::run(argc, argv);
}
