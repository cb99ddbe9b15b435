//! Cross-section data: exact disc, meshed disc and a polygon, plus the
//! relaxed cross-sectional form against its closed form.

use rod_uq::geometry::{
    make_disc, make_disc_mesh, make_polygon_section, q_rod_closed_form, q_rod_relaxation,
    IsotropicMaterial, RodStrain,
};

fn main() -> rod_uq::Result<()> {
    let exact = make_disc(1.0)?;
    println!("section          area       I2         I3         J");
    println!(
        "disc (exact)     {:.6}  {:.6}  {:.6}  {:.6}",
        exact.area, exact.i2, exact.i3, exact.j
    );
    for rings in [2, 4, 8] {
        let s = make_disc_mesh(1.0, rings)?;
        println!(
            "disc, {rings} rings    {:.6}  {:.6}  {:.6}  {:.6}",
            s.area, s.i2, s.i3, s.j
        );
    }
    let l_shape = [
        [0.0, 0.0],
        [2.0, 0.0],
        [2.0, 0.5],
        [0.5, 0.5],
        [0.5, 1.5],
        [0.0, 1.5],
    ];
    let s = make_polygon_section(&l_shape, 0.1)?;
    println!(
        "L-shape          {:.6}  {:.6}  {:.6}  {:.6}",
        s.area, s.i2, s.i3, s.j
    );

    let mat = IsotropicMaterial::new(30.8, 66.6)?;
    let meshed = make_disc_mesh(1.0, 6)?;
    let xi = RodStrain::new([0.5, 0.2, -0.1, 0.3])?;
    let relaxed = q_rod_relaxation(meshed.mesh.as_ref().unwrap(), &mat.tensor()?, &xi)?;
    let closed = q_rod_closed_form(&exact, &mat, &xi);
    println!(
        "\nQ^rod at {:?}: relaxed {relaxed:.5}, closed form {closed:.5}",
        xi.0
    );
    Ok(())
}
