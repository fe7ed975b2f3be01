fn main() {
    println!("ee-models");
}
