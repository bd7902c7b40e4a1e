#include <cstdio>

int main() { return 0; }  // placeholder until the scenario runner lands
