namespace dpt {
}
