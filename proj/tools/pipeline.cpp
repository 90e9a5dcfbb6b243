#include "reasonrec/pipeline.hpp"

int main(int argc, char** argv) { return reasonrec::run_cli(argc, argv); }
