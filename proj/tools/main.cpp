#include "survmct/cli.hpp"

int main(int argc, char** argv) {
    return survmct::run_cli(argc, argv);
}
