#include "app.hpp"

int main(int argc, char** argv) { return pvtrade::app::run(argc, argv); }
