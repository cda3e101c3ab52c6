//! Status-list revocation: only the issuer may set a bit, and a list that
//! clears a bit is refused as a successor.

use sovereign_mdm::credential::{check_status, revoke, StatusList};
use sovereign_mdm::identity::{create_organization, Resolver};

fn main() {
    let mut resolver = Resolver::new();
    let issuer = create_organization(&mut resolver, [4; 32], 0).unwrap();
    let intruder = create_organization(&mut resolver, [5; 32], 0).unwrap();

    let v0 = StatusList::new(&issuer, "sl-demo", 0);
    let v1 = revoke(&issuer.keys, &v0, 17, 5).unwrap();
    println!("slot 17 before: {:?}, after: {:?}", check_status(&v0, 17).unwrap(), check_status(&v1, 17).unwrap());
    println!("revoked indices {:?}, signature ok {}", v1.revoked_indices(), v1.verify(&resolver));

    println!("intruder revoke: {:?}", revoke(&intruder.keys, &v1, 3, 6).unwrap_err());

    let mut rollback = v0.clone();
    rollback.updated_at = 9;
    rollback.signature = issuer.sign(&rollback.payload());
    println!("rollback as successor: {:?}", v1.accepts_successor(&rollback));
    println!("forward successor: {:?}", v0.accepts_successor(&v1));
}
