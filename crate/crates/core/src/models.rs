//! Reference models used by tests, the CLI and the documentation.

/// The four-command running example with variables `x`, `y`.
pub const BSP_SOURCE: &str = r#"dtmc

module bsp
  cf : [0..3] init 0;
  x : [0..1] init 1;
  y : [0..1] init 1;

  [] cf=0 & x=1 -> 1:(cf'=1)&(x'=0);
  [] cf=1 & x=0 -> 0.5:(cf'=2)&(y'=0) + 0.5:(cf'=3)&(y'=0);
  [] cf=2 -> 1:(cf'=0)&(x'=1);
  [] cf=3 -> 0.3:(cf'=0)&(x'=0) + 0.7:(cf'=1)&(x'=0);
endmodule

label "fail" = cf=0 & x=0;
"#;

/// The running example with resets inserted by hand: `x` reset after the
/// location-1 command and `y` reset on return from location 2.
pub const BSP_RESET_SOURCE: &str = r#"dtmc

module bsp
  cf : [0..3] init 0;
  x : [0..1] init 1;
  y : [0..1] init 1;

  [] cf=0 & x=1 -> 1:(cf'=1)&(x'=0);
  [] cf=1 & x=0 -> 0.5:(cf'=2)&(x'=1)&(y'=0) + 0.5:(cf'=3)&(x'=1)&(y'=0);
  [] cf=2 -> 1:(cf'=0)&(x'=1)&(y'=1);
  [] cf=3 -> 0.3:(cf'=0)&(x'=0) + 0.7:(cf'=1)&(x'=0);
endmodule

label "fail" = cf=0 & x=0;
"#;

/// The running example with `x` and `y` merged into a single variable.
pub const BSP_MERGED_SOURCE: &str = r#"dtmc

module bsp
  cf : [0..3] init 0;
  xy : [0..1] init 1;

  [] cf=0 & xy=1 -> 1:(cf'=1)&(xy'=0);
  [] cf=1 & xy=0 -> 0.5:(cf'=2)&(xy'=0) + 0.5:(cf'=3)&(xy'=0);
  [] cf=2 -> 1:(cf'=0)&(xy'=1);
  [] cf=3 -> 0.3:(cf'=0)&(xy'=0) + 0.7:(cf'=1)&(xy'=0);
endmodule
"#;
