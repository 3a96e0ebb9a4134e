#include "dipoletree/cli.hpp"

int main(int argc, char** argv) { return dipoletree::run_cli(argc, argv); }
