#include "mivs/cli.h"

int main(int argc, char** argv) { return mivs::cli::dispatch(argc, argv); }
