fn main() {
    println!("{}", adlif_core::placeholder());
}
