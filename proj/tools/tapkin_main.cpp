#include <iostream>

int main() {
    std::cout << "tapkin CLI placeholder\n";
    return 0;
}
