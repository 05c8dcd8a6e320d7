#include "odassim/cli.h"

int main(int argc, char **argv) { return odassim::cli::run(argc, argv); }
