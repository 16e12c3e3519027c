import "lib";
fn apply(f, xs) {
  let out = [];
  let i = 0;
  while i < len(xs) { push(out, f(xs[i])); i = i + 1; }
  return out;
}
fn risky(r) {
  try { if r.n % 2 == 0 { throw {code: r.n}; } } catch (e) { return e.code; }
  return -1.5;
}
#example "all" setup { let base = {n: 4, s: "a\tb"}; } {
  @{ apply(fn(x) { return x * 2; }, [1, 2, 3]) };
  @{ risky(base) } ;
  print("s" + base.s);
  !true || nil == false && 3 >= 2;
} teardown { base.n = 0; }
