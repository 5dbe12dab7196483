pub mod ter_oracle;
