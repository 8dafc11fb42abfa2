pub fn placeholder2() {}
