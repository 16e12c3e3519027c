fn g(x){ return @{ x * 2 }; }  fn f(a){ return g(a); }  fn h(a){ return g(a + 1); }  #example "ex1" { f(3); h(3); g(10); }